//! Per-point grid search for the weight thresholds and neighborhood size
//! that minimize the dimensionality entropy.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    eigenvalues_sym3, entropy_error, features_lps, is_degenerate, weighted_covariance, Degeneracy,
    classify, EigenTriple, FeatureVector,
};
use crate::geometry::PointCloud;
use crate::numfmt::fmt_sig;
use crate::spatial::{NeighborIndex, NeighborList};
use crate::weighting::{angle_unchecked, SigmoidParams};

/// Candidate thresholds and neighbor counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    a: Vec<f64>,
    b: Vec<f64>,
    k: Vec<usize>,
}

impl ParameterGrid {
    /// Sorts and deduplicates each list. Angles must lie in `[0, π]`, counts must be positive.
    pub fn new(mut a: Vec<f64>, mut b: Vec<f64>, mut k: Vec<usize>) -> Result<Self> {
        for (name, list) in [("A", &mut a), ("B", &mut b)] {
            if list.is_empty() {
                return Err(Error::InvalidGrid(format!("{name} is empty")));
            }
            if let Some(bad) = list.iter().find(|v| !(0.0..=PI).contains(*v)) {
                return Err(Error::InvalidGrid(format!("{name} value {bad} outside [0, pi]")));
            }
            list.sort_by(f64::total_cmp);
            list.dedup();
        }
        if k.is_empty() || k.contains(&0) {
            return Err(Error::InvalidGrid("K must be non-empty and positive".into()));
        }
        k.sort_unstable();
        k.dedup();
        let grid = ParameterGrid { a, b, k };
        if grid.pairs().is_empty() {
            return Err(Error::InvalidGrid("no pair with a <= b".into()));
        }
        Ok(grid)
    }

    /// Seven angles `0, π/6, …, π` for both thresholds and `k ∈ {6, …, 20}`.
    pub fn default_grid() -> Self {
        let angles: Vec<f64> = (0..=6).map(|i| i as f64 * PI / 6.0).collect();
        // i·π/6 for i = 6 rounds to π exactly
        ParameterGrid {
            a: angles.clone(),
            b: angles,
            k: (6..=20).collect(),
        }
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b
    }

    pub fn k_values(&self) -> &[usize] {
        &self.k
    }

    pub fn k_max(&self) -> usize {
        *self.k.last().expect("grid has at least one k")
    }

    /// Admissible `(a, b)` with `a <= b`, ordered by `a` then `b`.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.a
            .iter()
            .flat_map(|&a| self.b.iter().filter(move |&&b| a <= b).map(move |&b| (a, b)))
            .collect()
    }

    /// Position of `(a, b)` in [`ParameterGrid::pairs`].
    pub fn pair_index(&self, a: f64, b: f64) -> Option<usize> {
        self.pairs().iter().position(|&(x, y)| x == a && y == b)
    }

    pub fn evaluations_per_point(&self) -> usize {
        self.pairs().len() * self.k.len()
    }
}

/// An entropy value or the failure marker for a degenerate covariance.
///
/// Orders every finite value below `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum ErrorValue {
    Finite(f64),
    Infinite,
}

impl ErrorValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, ErrorValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ErrorValue::Finite(v) => Some(v),
            ErrorValue::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the failure marker.
    pub fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for ErrorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorValue::Finite(v) => write!(f, "{v}"),
            ErrorValue::Infinite => f.write_str("inf"),
        }
    }
}

/// Full result of one `(a, b, k)` evaluation at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub error: ErrorValue,
    pub eigenvalues: EigenTriple,
    /// `None` when the covariance degenerates.
    pub features: Option<FeatureVector>,
}

fn evaluate_eigen(ev: EigenTriple, degeneracy: &Degeneracy) -> Evaluation {
    if is_degenerate(&ev, degeneracy) {
        return Evaluation {
            error: ErrorValue::Infinite,
            eigenvalues: ev,
            features: None,
        };
    }
    match features_lps(&ev) {
        Ok(f) => Evaluation {
            error: ErrorValue::Finite(entropy_error(&f)),
            eigenvalues: ev,
            features: Some(f),
        },
        Err(_) => Evaluation {
            error: ErrorValue::Infinite,
            eigenvalues: ev,
            features: None,
        },
    }
}

/// Bundles a cloud with its neighbor index and degeneracy threshold.
pub struct Evaluator<'a> {
    cloud: &'a PointCloud,
    index: &'a NeighborIndex,
    degeneracy: Degeneracy,
}

impl<'a> Evaluator<'a> {
    pub fn new(cloud: &'a PointCloud, index: &'a NeighborIndex) -> Self {
        Evaluator {
            cloud,
            index,
            degeneracy: Degeneracy::for_cloud(cloud),
        }
    }

    pub fn cloud(&self) -> &PointCloud {
        self.cloud
    }

    pub fn index(&self) -> &NeighborIndex {
        self.index
    }

    pub fn degeneracy(&self) -> Degeneracy {
        self.degeneracy
    }

    fn angles(&self, nb: &NeighborList) -> Vec<f64> {
        let ni = self.cloud.normal(nb.center);
        nb.neighbors
            .iter()
            .map(|&j| angle_unchecked(&ni, &self.cloud.normal(j)))
            .collect()
    }

    fn evaluate_prefix(&self, nb: &NeighborList, weights: &[f64], k: usize) -> Evaluation {
        let c = weighted_covariance(self.cloud.points(), nb.center, &nb.neighbors[..k], &weights[..k]);
        evaluate_eigen(eigenvalues_sym3(&c), &self.degeneracy)
    }

    /// Entropy at point `i` for thresholds `params` and `k` neighbors.
    pub fn evaluate(&self, i: usize, params: &SigmoidParams, k: usize) -> Result<Evaluation> {
        let nb = self.index.knn(i, k)?;
        let weights: Vec<f64> = self.angles(&nb).iter().map(|&x| params.weight(x)).collect();
        Ok(self.evaluate_prefix(&nb, &weights, k))
    }

    pub fn evaluate_point(&self, i: usize, params: &SigmoidParams, k: usize) -> Result<ErrorValue> {
        Ok(self.evaluate(i, params, k)?.error)
    }

    /// Best error over `ks` for fixed thresholds; ties keep the smallest `k`.
    pub fn best_over_k(&self, i: usize, params: &SigmoidParams, ks: &[usize]) -> Result<(ErrorValue, usize)> {
        let k_max = *ks.iter().max().ok_or(Error::EmptyInput("k range"))?;
        let nb = self.index.knn(i, k_max)?;
        let weights: Vec<f64> = self.angles(&nb).iter().map(|&x| params.weight(x)).collect();
        let mut best = (ErrorValue::Infinite, ks[0]);
        for &k in ks {
            let e = self.evaluate_prefix(&nb, &weights, k).error;
            if e < best.0 {
                best = (e, k);
            }
        }
        Ok(best)
    }

    /// A single `(a, b, k)` evaluation packaged like an optimum, for per-point export.
    pub fn classify_point(&self, i: usize, params: &SigmoidParams, k: usize) -> Result<PointOptimum> {
        let eval = self.evaluate(i, params, k)?;
        Ok(PointOptimum {
            index: i,
            a: params.a(),
            b: params.b(),
            k,
            e_star: eval.error,
            all_degenerate: !eval.error.is_finite(),
            features: eval.features,
            pair_degenerate: vec![!eval.error.is_finite()],
        })
    }

    /// Exhaustive search over the grid at point `i`.
    pub fn optimize_point(&self, i: usize, grid: &ParameterGrid) -> Result<PointOptimum> {
        let nb = self.index.knn(i, grid.k_max())?;
        let angles = self.angles(&nb);
        let pairs = grid.pairs();
        let mut pair_degenerate = Vec::with_capacity(pairs.len());
        let mut weights = vec![0.0; angles.len()];

        let (a0, b0) = pairs[0];
        let mut best = PointOptimum {
            index: i,
            a: a0,
            b: b0,
            k: grid.k_values()[0],
            e_star: ErrorValue::Infinite,
            all_degenerate: true,
            features: None,
            pair_degenerate: Vec::new(),
        };

        for &(a, b) in &pairs {
            let params = SigmoidParams::new(a, b)?;
            for (w, &x) in weights.iter_mut().zip(&angles) {
                *w = params.weight(x);
            }
            let mut every_k_failed = true;
            for &k in grid.k_values() {
                let eval = self.evaluate_prefix(&nb, &weights, k);
                if eval.error.is_finite() {
                    every_k_failed = false;
                }
                if eval.error < best.e_star {
                    best.a = a;
                    best.b = b;
                    best.k = k;
                    best.e_star = eval.error;
                    best.features = eval.features;
                    best.all_degenerate = false;
                }
            }
            pair_degenerate.push(every_k_failed);
        }
        best.pair_degenerate = pair_degenerate;
        Ok(best)
    }
}

/// Optimal `(a*, b*, k*)` at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOptimum {
    pub index: usize,
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub e_star: ErrorValue,
    /// Every grid triple degenerated; `(a, b, k)` then hold the first triple.
    pub all_degenerate: bool,
    /// Features at the optimum.
    pub features: Option<FeatureVector>,
    /// Per admissible pair (in [`ParameterGrid::pairs`] order): degenerate for every `k`.
    pub pair_degenerate: Vec<bool>,
}

/// Provenance of an optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub grid: ParameterGrid,
    pub cloud_hash: String,
    pub n_points: usize,
    pub elapsed_secs: f64,
}

/// Per-point optima ordered by point index, plus provenance.
#[derive(Debug, Clone)]
pub struct OptimizationRun {
    pub optima: Vec<PointOptimum>,
    pub info: RunInfo,
}

/// Optimizes every point in parallel on the current rayon pool.
pub fn optimize_cloud(cloud: &PointCloud, grid: &ParameterGrid) -> Result<OptimizationRun> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if grid.k_max() > cloud.len() - 1 {
        return Err(Error::TooFewPoints {
            requested: grid.k_max(),
            available: cloud.len() - 1,
        });
    }
    let start = Instant::now();
    let index = NeighborIndex::build(cloud)?;
    let evaluator = Evaluator::new(cloud, &index);
    let optima = (0..cloud.len())
        .into_par_iter()
        .map(|i| evaluator.optimize_point(i, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimizationRun {
        optima,
        info: RunInfo {
            grid: grid.clone(),
            cloud_hash: cloud.content_hash(),
            n_points: cloud.len(),
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
    })
}

/// Errors at fixed thresholds, each minimized over the grid's `k` values.
pub fn fixed_errors(
    cloud: &PointCloud,
    index: &NeighborIndex,
    grid: &ParameterGrid,
    params: &SigmoidParams,
) -> Result<Vec<(ErrorValue, usize)>> {
    let evaluator = Evaluator::new(cloud, index);
    (0..cloud.len())
        .into_par_iter()
        .map(|i| evaluator.best_over_k(i, params, grid.k_values()))
        .collect()
}

pub const CSV_HEADER: &str = "index,x,y,z,a_star,b_star,k_star,E,L,P,S,class,all_degenerate";

/// One CSV row per optimum, 9 significant digits. Degenerate rows write
/// `inf` for `E`, `nan` for the features and `degenerate` as class.
pub fn write_optima_csv<W: Write>(mut w: W, cloud: &PointCloud, optima: &[PointOptimum]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let g = |x: f64| fmt_sig(x, 9);
    for o in optima {
        let p = cloud.point(o.index);
        let (l, pl, s, class) = match &o.features {
            Some(f) => (f.linearity, f.planarity, f.scattering, classify(f).to_string()),
            None => (f64::NAN, f64::NAN, f64::NAN, "degenerate".to_string()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            o.index,
            g(p.x),
            g(p.y),
            g(p.z),
            g(o.a),
            g(o.b),
            o.k,
            g(o.e_star.as_f64()),
            g(l),
            g(pl),
            g(s),
            class,
            o.all_degenerate
        )?;
    }
    Ok(())
}

/// The normal of `i` is antipodal to all others; used to reproduce the
/// flipped-normal failure.
#[doc(hidden)]
pub fn flipped_center_normals(n: usize, center: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|j| if j == center { Vector3::z() } else { -Vector3::z() })
        .collect()
}
