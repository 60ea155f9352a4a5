//! Eigen-decomposition of symmetric 3×3 matrices.
//!
//! The characteristic cubic is solved in closed form (trigonometric roots),
//! eigenvectors come from cross products of the rows of `A - λI`, and the
//! eigenvalues are then refined once as Rayleigh quotients of those vectors.
//! When two roots are close the cross-product vectors lose accuracy, so the
//! solver switches to cyclic Jacobi rotations instead.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::Sym3;

/// Roots closer than this (relative to the spectral scale) go to Jacobi.
const CLUSTER_GAP: f64 = 1e-4;
const JACOBI_MAX_SWEEPS: usize = 32;
const JACOBI_TOL: f64 = 1e-13;
/// Negative eigenvalues down to `-NEG_CLAMP · trace` are rounding noise.
const NEG_CLAMP: f64 = 1e-12;

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen {
    pub values: [f64; 3],
    pub vectors: [Vector3<f64>; 3],
}

/// Decomposes `m`. Values come back sorted `λ1 >= λ2 >= λ3`; negative values
/// within `-1e-12 · trace` are set to zero.
pub fn eigen_sym3(m: &Sym3) -> SymEigen {
    let scale = m.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return SymEigen {
            values: [0.0; 3],
            vectors: [Vector3::x(), Vector3::y(), Vector3::z()],
        };
    }
    let a = m.to_matrix() / scale;
    let (mut values, vectors) = closed_form(&a).unwrap_or_else(|| jacobi(&a));

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut sorted_values = order.map(|i| values[i] * scale);
    let vectors = order.map(|i| vectors[i]);

    let trace = m.trace();
    for v in &mut sorted_values {
        if *v < 0.0 && *v >= -NEG_CLAMP * trace.abs() {
            *v = 0.0;
        }
    }
    values = sorted_values;
    SymEigen { values, vectors }
}

fn largest_cross(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let r0 = m.row(0).transpose();
    let r1 = m.row(1).transpose();
    let r2 = m.row(2).transpose();
    let candidates = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    let norm = best.norm();
    (norm > 0.0).then(|| best / norm)
}

/// Trigonometric roots plus cross-product vectors; `None` if the spectrum is clustered.
fn closed_form(a: &Matrix3<f64>) -> Option<([f64; 3], [Vector3<f64>; 3])> {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p <= 1e-300 {
        return None;
    }
    let b = (a - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;

    let spread = e1.abs().max(e3.abs()).max(p);
    if (e1 - e2).min(e2 - e3) < CLUSTER_GAP * spread {
        return None;
    }

    let v1 = largest_cross(&(a - Matrix3::identity() * e1))?;
    let v3 = largest_cross(&(a - Matrix3::identity() * e3))?;
    let v3 = v3 - v1 * v1.dot(&v3);
    let v3 = v3.try_normalize(0.0)?;
    let v2 = v3.cross(&v1);

    let rq = |v: &Vector3<f64>| v.dot(&(a * v));
    Some(([rq(&v1), rq(&v2), rq(&v3)], [v1, v2, v3]))
}

/// Cyclic Jacobi rotations until the off-diagonal part is negligible.
fn jacobi(a: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let mut m = *a;
    let mut v = Matrix3::<f64>::identity();
    let norm = m.norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = (m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2)).sqrt();
        if off <= JACOBI_TOL * norm {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = m[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::<f64>::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            m = rot.transpose() * m * rot;
            m[(p, q)] = 0.0;
            m[(q, p)] = 0.0;
            v *= rot;
        }
    }
    let cols = [0, 1, 2].map(|i| v.column(i).into_owned());
    ([m[(0, 0)], m[(1, 1)], m[(2, 2)]], cols)
}
