//! Weighted covariance, eigenvalue-based dimensionality features and the
//! entropy of those features.

mod eigen;

use std::fmt;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::spatial::NeighborList;
use crate::weighting::WeightMap;

pub use eigen::{eigen_sym3, SymEigen};

/// Symmetric 3×3 matrix stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym3 {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl Sym3 {
    pub const ZERO: Sym3 = Sym3 {
        xx: 0.0,
        xy: 0.0,
        xz: 0.0,
        yy: 0.0,
        yz: 0.0,
        zz: 0.0,
    };

    pub fn diagonal(x: f64, y: f64, z: f64) -> Self {
        Sym3 {
            xx: x,
            yy: y,
            zz: z,
            ..Sym3::ZERO
        }
    }

    /// Accepts a matrix whose asymmetry is within `1e-12` of its largest entry,
    /// averaging the off-diagonal pairs.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let scale = m.amax();
        let asym = (m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(if scale > 0.0 { asym / scale } else { asym }));
        }
        Ok(Sym3 {
            xx: m[(0, 0)],
            xy: 0.5 * (m[(0, 1)] + m[(1, 0)]),
            xz: 0.5 * (m[(0, 2)] + m[(2, 0)]),
            yy: m[(1, 1)],
            yz: 0.5 * (m[(1, 2)] + m[(2, 1)]),
            zz: m[(2, 2)],
        })
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.xx, self.xy, self.xz, //
            self.xy, self.yy, self.yz, //
            self.xz, self.yz, self.zz,
        )
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn max_abs(&self) -> f64 {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Adds `w · d dᵀ`.
    #[inline]
    pub fn add_outer(&mut self, d: &Vector3<f64>, w: f64) {
        self.xx += w * d.x * d.x;
        self.xy += w * d.x * d.y;
        self.xz += w * d.x * d.z;
        self.yy += w * d.y * d.y;
        self.yz += w * d.y * d.z;
        self.zz += w * d.z * d.z;
    }

    pub fn scaled(&self, s: f64) -> Sym3 {
        Sym3 {
            xx: self.xx * s,
            xy: self.xy * s,
            xz: self.xz * s,
            yy: self.yy * s,
            yz: self.yz * s,
            zz: self.zz * s,
        }
    }
}

/// Eigenvalues `λ1 >= λ2 >= λ3 >= 0` of a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenTriple {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl EigenTriple {
    /// Sorts the values and clips any leftover negatives to zero.
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        let mut v = [a, b, c];
        v.sort_by(|x, y| y.total_cmp(x));
        EigenTriple {
            l1: v[0].max(0.0),
            l2: v[1].max(0.0),
            l3: v[2].max(0.0),
        }
    }

    pub fn sum(&self) -> f64 {
        self.l1 + self.l2 + self.l3
    }
}

/// Eigenvalues of `m`, descending, with tiny negatives clamped.
pub fn eigenvalues_sym3(m: &Sym3) -> EigenTriple {
    let [a, b, c] = eigen_sym3(m).values;
    EigenTriple::new(a, b, c)
}

/// Linearity, planarity and scattering; non-negative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub linearity: f64,
    pub planarity: f64,
    pub scattering: f64,
}

impl FeatureVector {
    /// Checks `L, P, S ∈ [0, 1]` and `L + P + S = 1 ± 1e-12`.
    pub fn new(linearity: f64, planarity: f64, scattering: f64) -> Result<Self> {
        let parts = [linearity, planarity, scattering];
        let sum: f64 = parts.iter().sum();
        if parts.iter().any(|v| !(0.0..=1.0).contains(v)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "({linearity}, {planarity}, {scattering}) is not a probability vector"
            )));
        }
        Ok(FeatureVector {
            linearity,
            planarity,
            scattering,
        })
    }
}

/// Dominant dimensionality of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimensionality {
    Linear,
    Planar,
    Scattered,
}

impl fmt::Display for Dimensionality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimensionality::Linear => "linear",
            Dimensionality::Planar => "planar",
            Dimensionality::Scattered => "scattered",
        })
    }
}

/// Weighted covariance of a neighborhood.
///
/// The barycenter averages every member, the center included. The weighted
/// sum of outer products runs over the neighbors only, so the matrix is zero
/// whenever every neighbor has weight 0.
pub fn covariance(cloud: &PointCloud, nbrs: &NeighborList, weights: &WeightMap) -> Sym3 {
    let w: Vec<f64> = nbrs
        .neighbors
        .iter()
        .map(|&j| weights.weight_of(j).unwrap_or(0.0))
        .collect();
    weighted_covariance(cloud.points(), nbrs.center, &nbrs.neighbors, &w)
}

/// [`covariance`] on raw slices; `weights[t]` belongs to `neighbors[t]`.
pub fn weighted_covariance(
    points: &[Point3<f64>],
    center: usize,
    neighbors: &[usize],
    weights: &[f64],
) -> Sym3 {
    debug_assert_eq!(neighbors.len(), weights.len());
    let mut sum = points[center].coords;
    for &j in neighbors {
        sum += points[j].coords;
    }
    let bary = sum / (neighbors.len() + 1) as f64;
    let mut c = Sym3::ZERO;
    for (&j, &w) in neighbors.iter().zip(weights) {
        if w != 0.0 {
            c.add_outer(&(points[j].coords - bary), w);
        }
    }
    c
}

/// `L = (λ1-λ2)/λ1`, `P = (λ2-λ3)/λ1`, `S = λ3/λ1`.
pub fn features_lps(ev: &EigenTriple) -> Result<FeatureVector> {
    if !(ev.l1 > 0.0) {
        return Err(Error::DegenerateEigenvalues);
    }
    Ok(FeatureVector {
        linearity: (ev.l1 - ev.l2) / ev.l1,
        planarity: (ev.l2 - ev.l3) / ev.l1,
        scattering: ev.l3 / ev.l1,
    })
}

#[inline]
fn neg_x_ln_x(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of `(L, P, S)` with `0 · ln 0 = 0`; lies in `[0, ln 3]`.
pub fn entropy_error(f: &FeatureVector) -> f64 {
    let e = neg_x_ln_x(f.linearity) + neg_x_ln_x(f.planarity) + neg_x_ln_x(f.scattering);
    e.max(0.0)
}

/// Absolute threshold under which the eigenvalue sum counts as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub eps_abs: f64,
}

impl Degeneracy {
    /// `1e-24 · diag²`, where `diag` is the cloud's bounding-box diagonal.
    pub fn for_cloud(cloud: &PointCloud) -> Self {
        Self::for_scale(cloud.bounding_box_diagonal())
    }

    pub fn for_scale(diag: f64) -> Self {
        Degeneracy {
            eps_abs: 1e-24 * diag * diag,
        }
    }
}

/// True when `λ1 + λ2 + λ3 <= eps_abs`.
pub fn is_degenerate(ev: &EigenTriple, threshold: &Degeneracy) -> bool {
    ev.sum() <= threshold.eps_abs
}

/// The dimensionality with the largest feature; ties prefer linear, then planar.
pub fn classify(f: &FeatureVector) -> Dimensionality {
    if f.linearity >= f.planarity && f.linearity >= f.scattering {
        Dimensionality::Linear
    } else if f.planarity >= f.scattering {
        Dimensionality::Planar
    } else {
        Dimensionality::Scattered
    }
}
