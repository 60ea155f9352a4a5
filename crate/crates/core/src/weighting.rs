//! Cosine-sigmoid weights driven by the angle between normals.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, UNIT_TOLERANCE};
use crate::spatial::NeighborList;

/// Thresholds `0 <= a <= b <= π` of the cosine-sigmoid.
///
/// Angles below `a` get weight 1, angles above `b` weight 0, and the interval
/// `[a, b]` is bridged by a half cosine. With `a == b` the function is a sharp
/// cut-off that keeps the threshold itself (`x <= a` maps to 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidParams {
    a: f64,
    b: f64,
}

/// Which piece of the sigmoid an angle falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    One,
    Blend,
    Zero,
}

impl SigmoidParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a <= b && b <= PI) {
            return Err(Error::InvalidParams { a, b });
        }
        Ok(Self { a, b })
    }

    /// Uniform weights (`a = b = π`).
    pub const EQUAL: SigmoidParams = SigmoidParams { a: PI, b: PI };

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn is_sharp(&self) -> bool {
        self.a == self.b
    }

    /// Branch of an angle in `[0, π]`.
    pub fn branch(&self, x: f64) -> Branch {
        if self.is_sharp() {
            if x <= self.a {
                Branch::One
            } else {
                Branch::Zero
            }
        } else if x < self.a {
            Branch::One
        } else if x > self.b {
            Branch::Zero
        } else {
            Branch::Blend
        }
    }

    /// Branch from the inner product of two unit normals, without `arccos`:
    /// `x < a` iff `⟨n_i, n_j⟩ > cos a`, and `x > b` iff `⟨n_i, n_j⟩ < cos b`.
    ///
    /// Agrees with [`SigmoidParams::branch`] except within rounding of the thresholds.
    pub fn branch_from_inner_product(&self, dot: f64) -> Branch {
        let (cos_a, cos_b) = (self.a.cos(), self.b.cos());
        if self.is_sharp() {
            if dot >= cos_a {
                Branch::One
            } else {
                Branch::Zero
            }
        } else if dot > cos_a {
            Branch::One
        } else if dot < cos_b {
            Branch::Zero
        } else {
            Branch::Blend
        }
    }

    /// The sigmoid at an angle assumed to lie in `[0, π]`.
    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        match self.branch(x) {
            Branch::One => 1.0,
            Branch::Zero => 0.0,
            Branch::Blend => 0.5 * (PI * (x - self.a) / (self.b - self.a)).cos() + 0.5,
        }
    }
}

/// Angle between two unit vectors, in `[0, π]`.
///
/// The inner product is clamped to `[-1, 1]` before `arccos`; bitwise equal
/// (or opposite) inputs return exactly 0 (or π) even when rounding left them
/// a few ulps off unit length.
pub fn normal_angle(u: &Vector3<f64>, v: &Vector3<f64>) -> Result<f64> {
    for w in [u, v] {
        let len = w.norm();
        if !((len - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NonUnitNormal {
                index: 0,
                length: len,
            });
        }
    }
    Ok(angle_unchecked(u, v))
}

#[inline]
pub(crate) fn angle_unchecked(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    if u == v {
        return 0.0;
    }
    if *u == -v {
        return PI;
    }
    u.dot(v).clamp(-1.0, 1.0).acos()
}

/// The cosine-sigmoid at `x`, rejecting angles outside `[0, π]`.
pub fn sigmoid_cos(params: &SigmoidParams, x: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&x) {
        return Err(Error::AngleOutOfRange(x));
    }
    Ok(params.weight(x))
}

/// Weights `w_ij` for every member `j` of a neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub center: usize,
    /// `(j, w_ij)` in neighborhood order, center first with weight 1.
    pub pairs: Vec<(usize, f64)>,
}

impl WeightMap {
    pub fn weight_of(&self, j: usize) -> Option<f64> {
        self.pairs.iter().find(|(idx, _)| *idx == j).map(|(_, w)| *w)
    }

    /// True when every neighbor other than the center has weight 0.
    pub fn all_neighbors_zero(&self) -> bool {
        self.pairs
            .iter()
            .all(|&(j, w)| j == self.center || w == 0.0)
    }
}

/// `w_ij = φ(∠(n_i, n_j))` for `j` in the neighborhood; `w_ii = 1`.
pub fn neighborhood_weights(
    cloud: &PointCloud,
    nbrs: &NeighborList,
    params: &SigmoidParams,
) -> Result<WeightMap> {
    let i = nbrs.center;
    let ni = cloud.normal(i);
    let mut pairs = Vec::with_capacity(nbrs.k() + 1);
    pairs.push((i, 1.0));
    for &j in &nbrs.neighbors {
        let x = normal_angle(&ni, &cloud.normal(j)).map_err(|e| match e {
            Error::NonUnitNormal { length, .. } => Error::NonUnitNormal {
                index: if (ni.norm() - 1.0).abs() > UNIT_TOLERANCE { i } else { j },
                length,
            },
            other => other,
        })?;
        pairs.push((j, params.weight(x)));
    }
    Ok(WeightMap { center: i, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;
    use proptest::prelude::*;

    use crate::spatial::NeighborIndex;

    fn params(a: f64, b: f64) -> SigmoidParams {
        SigmoidParams::new(a, b).unwrap()
    }

    #[test]
    fn angles() {
        let x = Vector3::x();
        assert_eq!(normal_angle(&x, &x).unwrap(), 0.0);
        assert_eq!(normal_angle(&x, &Vector3::y()).unwrap(), PI / 2.0);
        assert_eq!(normal_angle(&x, &-x).unwrap(), PI);
        assert!(normal_angle(&x, &(x * 1.1)).is_err());
    }

    #[test]
    fn sigmoid_examples() {
        assert!((sigmoid_cos(&params(0.0, PI), PI / 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(sigmoid_cos(&params(0.75 * PI, PI), PI / 2.0).unwrap(), 1.0);
        let cut = params(2.0 * PI / 3.0, 2.0 * PI / 3.0);
        assert_eq!(sigmoid_cos(&cut, 2.0 * PI / 3.0).unwrap(), 1.0);
        assert_eq!(sigmoid_cos(&cut, 2.0 * PI / 3.0 + 1e-9).unwrap(), 0.0);
        for i in 0..=100 {
            let x = PI * i as f64 / 100.0;
            assert_eq!(sigmoid_cos(&SigmoidParams::EQUAL, x).unwrap(), 1.0);
        }
        assert!(sigmoid_cos(&cut, -0.1).is_err());
        assert!(sigmoid_cos(&cut, 3.5).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(SigmoidParams::new(1.0, 0.5).is_err());
        assert!(SigmoidParams::new(-0.1, 0.5).is_err());
        assert!(SigmoidParams::new(0.0, 3.2).is_err());
        assert!(SigmoidParams::new(f64::NAN, 1.0).is_err());
    }

    fn cloud(points: Vec<Point3<f64>>, normals: Vec<Vector3<f64>>) -> PointCloud {
        PointCloud::new(points, normals).unwrap()
    }

    #[test]
    fn identical_normals_weigh_one() {
        let pts: Vec<_> = (0..6).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let c = cloud(pts, vec![Vector3::z(); 6]);
        let idx = NeighborIndex::build(&c).unwrap();
        let nb = idx.knn(2, 5).unwrap();
        for p in [params(0.0, 0.0), params(0.3, 1.0), SigmoidParams::EQUAL] {
            let w = neighborhood_weights(&c, &nb, &p).unwrap();
            assert_eq!(w.pairs.len(), 6);
            assert!(w.pairs.iter().all(|&(_, w)| w == 1.0));
        }
    }

    #[test]
    fn antipodal_center_zeroes_neighbors() {
        let pts: Vec<_> = (0..5).map(|i| Point3::new(i as f64, (i * i) as f64, 0.0)).collect();
        let mut normals = vec![-Vector3::z(); 5];
        normals[0] = Vector3::z();
        let c = cloud(pts, normals);
        let idx = NeighborIndex::build(&c).unwrap();
        let w = neighborhood_weights(&c, &idx.knn(0, 4).unwrap(), &params(0.0, 0.0)).unwrap();
        assert_eq!(w.weight_of(0), Some(1.0));
        assert!(w.all_neighbors_zero());
    }

    #[test]
    fn right_dihedral_sharp_cut() {
        let spec = crate::geometry::ShapeSpec::Dihedral {
            per_side: 4,
            angle: PI / 2.0,
            spacing: 1.0,
        };
        let c = crate::geometry::generate_synthetic(&spec).unwrap();
        let idx = NeighborIndex::build(&c).unwrap();
        let p = params(PI / 6.0, PI / 6.0);
        for i in 0..c.len() {
            let w = neighborhood_weights(&c, &idx.knn(i, 10).unwrap(), &p).unwrap();
            for (j, wij) in w.pairs {
                let same_face = (i < 16) == (j < 16);
                assert_eq!(wij, if same_face { 1.0 } else { 0.0 });
            }
        }
    }

    fn unit() -> impl Strategy<Value = Vector3<f64>> {
        (-1.0f64..1.0, 0.0f64..2.0 * PI).prop_map(|(z, phi)| {
            let r = (1.0 - z * z).sqrt();
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
    }

    fn ab() -> impl Strategy<Value = SigmoidParams> {
        (0.0f64..=PI, 0.0f64..=PI).prop_map(|(x, y)| params(x.min(y), x.max(y)))
    }

    proptest! {
        #[test]
        fn weights_in_unit_interval_and_symmetric(u in unit(), v in unit(), p in ab()) {
            let wuv = p.weight(normal_angle(&u, &v).unwrap());
            let wvu = p.weight(normal_angle(&v, &u).unwrap());
            prop_assert!((0.0..=1.0).contains(&wuv));
            prop_assert_eq!(wuv, wvu);
        }

        #[test]
        fn inner_product_branch_matches_angle(u in unit(), v in unit(), p in ab()) {
            let dot = u.dot(&v);
            let x = normal_angle(&u, &v).unwrap();
            // skip rounding-sized neighbourhoods of the thresholds
            prop_assume!((dot - p.a().cos()).abs() > 1e-9 && (dot - p.b().cos()).abs() > 1e-9);
            prop_assert_eq!(p.branch(x), p.branch_from_inner_product(dot));
        }

        #[test]
        fn monotone_non_increasing(p in ab()) {
            let mut prev = f64::INFINITY;
            for i in 0..=1000 {
                let w = p.weight(PI * i as f64 / 1000.0);
                prop_assert!(w <= prev);
                prev = w;
            }
        }
    }
}
