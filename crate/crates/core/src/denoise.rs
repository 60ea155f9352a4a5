//! Normal-direction noise, normal filtering with fixed or entropy-selected
//! neighborhood sizes, and mean squared error against reference normals.

use std::io::{self, Write};

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    eigen_sym3, eigenvalues_sym3, entropy_error, features_lps, is_degenerate, weighted_covariance,
    Degeneracy, Sym3,
};
use crate::geometry::{PointCloud, TriangleMesh};
use crate::numfmt::fmt_sig;
use crate::spatial::{mean_knn_distance, NeighborIndex, NeighborList};
use crate::weighting::SigmoidParams;

/// Neighbors used for the mean spacing `ℓ`.
pub const SPACING_NEIGHBORS: usize = 6;

/// Noise amplitude as a multiple of the mean spacing, plus the RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    factor: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(factor: f64, seed: u64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise factor {factor} must be >= 0")));
        }
        Ok(NoiseSpec { factor, seed })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

/// The Gaussian offset of point `i`. Each point draws from its own ChaCha
/// stream, so the value does not depend on evaluation order.
pub fn point_offset(seed: u64, i: usize, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    Normal::new(0.0, sigma)
        .expect("sigma is finite and positive")
        .sample(&mut rng)
}

/// Offsets `δ_i` for every point, with `σ = factor · ℓ`.
pub fn noise_offsets(cloud: &PointCloud, spec: &NoiseSpec) -> Result<Vec<f64>> {
    if spec.factor == 0.0 {
        return Ok(vec![0.0; cloud.len()]);
    }
    let sigma = spec.factor * mean_knn_distance(cloud, SPACING_NEIGHBORS)?;
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| point_offset(spec.seed, i, sigma))
        .collect())
}

/// Moves each point by `δ_i · n_i`; normals are kept as they were.
pub fn add_normal_noise(cloud: &PointCloud, spec: &NoiseSpec) -> Result<PointCloud> {
    let offsets = noise_offsets(cloud, spec)?;
    let points: Vec<Point3<f64>> = cloud
        .points()
        .iter()
        .zip(cloud.normals())
        .zip(&offsets)
        .map(|((p, n), &d)| p + n * d)
        .collect();
    PointCloud::new(points, cloud.normals().to_vec())
}

/// How normals are re-estimated after the positions moved.
#[derive(Debug, Clone, PartialEq)]
pub enum Renormal {
    /// Area-weighted vertex normals over these faces.
    Mesh(Vec<[usize; 3]>),
    /// Smallest principal axis of the `k` nearest neighbors, flipped to agree
    /// with the normal the point already carries.
    Pca { k: usize },
}

/// Normals of `cloud`'s current positions.
pub fn estimate_normals(cloud: &PointCloud, how: &Renormal) -> Result<Vec<Vector3<f64>>> {
    match how {
        Renormal::Mesh(faces) => {
            TriangleMesh::new(cloud.points().to_vec(), faces.clone())?.compute_vertex_normals()
        }
        Renormal::Pca { k } => {
            let index = NeighborIndex::build(cloud)?;
            let all_ones = vec![1.0; *k];
            (0..cloud.len())
                .into_par_iter()
                .map(|i| {
                    let nb = index.knn(i, *k)?;
                    let c = weighted_covariance(cloud.points(), i, &nb.neighbors, &all_ones);
                    let e = eigen_sym3(&c);
                    let n = e.vectors[2];
                    Ok(if n.dot(&cloud.normal(i)) < 0.0 { -n } else { n })
                })
                .collect()
        }
    }
}

/// `(1/n) Σ ‖a_i - b_i‖²`.
pub fn mse(truth: &[Vector3<f64>], test: &[Vector3<f64>]) -> Result<f64> {
    if truth.len() != test.len() {
        return Err(Error::LengthMismatch {
            points: truth.len(),
            normals: test.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("normal fields"));
    }
    let sum: f64 = truth.iter().zip(test).map(|(a, b)| (a - b).norm_squared()).sum();
    Ok(sum / truth.len() as f64)
}

/// Parameters of the normal filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Iterations.
    pub p: usize,
    /// Eigenvalues at or above `tau` times the tensor trace are kept.
    pub tau: f64,
    /// Neighbors count when `⟨n_i, n_j⟩ > rho`.
    pub rho: f64,
    pub k_default: usize,
    /// The adaptive search covers `k_default ± halfwidth`.
    pub halfwidth: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            p: 150,
            tau: 0.95,
            rho: 0.3,
            k_default: 15,
            halfwidth: 10,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig(format!("tau {} outside (0, 1]", self.tau)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!("rho {} outside (-1, 1)", self.rho)));
        }
        if self.k_default < 1 {
            return Err(Error::InvalidConfig("k_default must be positive".into()));
        }
        Ok(())
    }

    /// Candidate sizes for the adaptive mode, clamped to `[3, n - 1]`.
    pub fn k_range(&self, n: usize) -> Vec<usize> {
        let lo = self.k_default.saturating_sub(self.halfwidth).max(3);
        let hi = (self.k_default + self.halfwidth).min(n.saturating_sub(1));
        (lo..=hi).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterMode {
    Fixed,
    Adaptive,
}

impl std::str::FromStr for FilterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(FilterMode::Fixed),
            "adaptive" => Ok(FilterMode::Adaptive),
            other => Err(Error::InvalidConfig(format!("unknown filter mode {other:?}"))),
        }
    }
}

struct FilterContext<'a> {
    cloud: &'a PointCloud,
    lists: Vec<NeighborList>,
    config: FilterConfig,
    k_fixed: usize,
    k_range: Vec<usize>,
    cut: SigmoidParams,
    degeneracy: Degeneracy,
}

impl FilterContext<'_> {
    fn cut_weights(&self, i: usize, nb: &[usize], normals: &[Vector3<f64>]) -> Vec<f64> {
        nb.iter()
            .map(|&j| if normals[i].dot(&normals[j]) > self.config.rho { 1.0 } else { 0.0 })
            .collect()
    }

    /// The `k` with the least entropy under the sharp cut-off at `arccos ρ`.
    fn adaptive_k(&self, i: usize, normals: &[Vector3<f64>]) -> usize {
        let nb = &self.lists[i].neighbors;
        let weights: Vec<f64> = nb
            .iter()
            .map(|&j| {
                let x = normals[i].dot(&normals[j]).clamp(-1.0, 1.0).acos();
                self.cut.weight(x)
            })
            .collect();
        let mut best = (f64::INFINITY, self.k_fixed);
        for &k in &self.k_range {
            let c = weighted_covariance(self.cloud.points(), i, &nb[..k], &weights[..k]);
            let ev = eigenvalues_sym3(&c);
            if is_degenerate(&ev, &self.degeneracy) {
                continue;
            }
            if let Ok(f) = features_lps(&ev) {
                let e = entropy_error(&f);
                if e < best.0 {
                    best = (e, k);
                }
            }
        }
        best.1
    }

    fn update(&self, i: usize, normals: &[Vector3<f64>], mode: FilterMode) -> Vector3<f64> {
        let k = match mode {
            FilterMode::Fixed => self.k_fixed,
            FilterMode::Adaptive => self.adaptive_k(i, normals),
        };
        let mut nb = &self.lists[i].neighbors[..k];
        let mut w = self.cut_weights(i, nb, normals);
        if w.iter().all(|&x| x == 0.0) {
            nb = &self.lists[i].neighbors[..self.k_fixed];
            w = vec![1.0; nb.len()];
        }
        let mut t = Sym3::ZERO;
        for (&j, &wj) in nb.iter().zip(&w) {
            if wj != 0.0 {
                t.add_outer(&normals[j], wj);
            }
        }
        let t = t.scaled(1.0 / w.iter().sum::<f64>());
        project_dominant(&t, &normals[i], self.config.tau)
    }
}

/// Projects `n` onto the span of the eigenvectors of `t` whose eigenvalues
/// reach `tau · trace(t)`, then normalizes. A vanishing projection, including
/// the case where no eigenvalue qualifies, keeps `n`.
pub fn project_dominant(t: &Sym3, n: &Vector3<f64>, tau: f64) -> Vector3<f64> {
    let e = eigen_sym3(t);
    let cut = tau * t.trace();
    let mut proj = Vector3::zeros();
    for (l, v) in e.values.iter().zip(&e.vectors) {
        if *l >= cut {
            proj += v * v.dot(n);
        }
    }
    match proj.try_normalize(1e-12) {
        Some(p) => p,
        None => *n,
    }
}

/// Runs `config.p` filter iterations over the cloud's normals. Every update
/// in an iteration reads the previous iteration's field.
pub fn filter_normals(cloud: &PointCloud, config: &FilterConfig, mode: FilterMode) -> Result<Vec<Vector3<f64>>> {
    config.validate()?;
    let n = cloud.len();
    let k_fixed = config.k_default.min(n.saturating_sub(1));
    if k_fixed == 0 {
        return Err(Error::TooFewPoints {
            requested: config.k_default,
            available: n.saturating_sub(1),
        });
    }
    let k_range = match mode {
        FilterMode::Fixed => vec![k_fixed],
        FilterMode::Adaptive => config.k_range(n),
    };
    let k_max = k_range.iter().copied().chain([k_fixed]).max().unwrap_or(k_fixed);
    let index = NeighborIndex::build(cloud)?;
    let lists = (0..n)
        .into_par_iter()
        .map(|i| index.knn(i, k_max))
        .collect::<Result<Vec<_>>>()?;
    let cut_angle = config.rho.clamp(-1.0, 1.0).acos();
    let ctx = FilterContext {
        cloud,
        lists,
        config: *config,
        k_fixed,
        k_range,
        cut: SigmoidParams::new(cut_angle, cut_angle)?,
        degeneracy: Degeneracy::for_cloud(cloud),
    };

    let mut normals = cloud.normals().to_vec();
    for _ in 0..config.p {
        normals = (0..n)
            .into_par_iter()
            .map(|i| ctx.update(i, &normals, mode))
            .collect();
    }
    Ok(normals)
}

/// One line of the MSE table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub factor: f64,
    pub mse_noise: f64,
    pub mse_fixed: f64,
    pub mse_adaptive: f64,
}

/// A model for [`denoise_report`]: the clean cloud carries the reference normals.
#[derive(Debug, Clone)]
pub struct ReportModel {
    pub name: String,
    pub clean: PointCloud,
    pub renormal: Renormal,
}

/// Noisy cloud with re-estimated normals, ready for filtering.
pub fn noisy_with_normals(clean: &PointCloud, spec: &NoiseSpec, how: &Renormal) -> Result<PointCloud> {
    if spec.factor() == 0.0 {
        return Ok(clean.clone());
    }
    let moved = add_normal_noise(clean, spec)?;
    let normals = estimate_normals(&moved, how)?;
    moved.with_normals(normals)
}

/// One row per model and noise factor. At factor 0 the noisy normals are the
/// reference normals and no filtering runs.
pub fn denoise_report(
    models: &[ReportModel],
    factors: &[f64],
    seed: u64,
    config: &FilterConfig,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::with_capacity(models.len() * factors.len());
    for model in models {
        let truth = model.clean.normals();
        for &factor in factors {
            let spec = NoiseSpec::new(factor, seed)?;
            let noisy = noisy_with_normals(&model.clean, &spec, &model.renormal)?;
            let mse_noise = mse(truth, noisy.normals())?;
            let (mse_fixed, mse_adaptive) = if factor == 0.0 {
                (mse_noise, mse_noise)
            } else {
                (
                    mse(truth, &filter_normals(&noisy, config, FilterMode::Fixed)?)?,
                    mse(truth, &filter_normals(&noisy, config, FilterMode::Adaptive)?)?,
                )
            };
            rows.push(ReportRow {
                model: model.name.clone(),
                factor,
                mse_noise,
                mse_fixed,
                mse_adaptive,
            });
        }
    }
    Ok(rows)
}

pub const REPORT_HEADER: &str = "model,factor,mse_noise,mse_fixed,mse_adaptive";

pub fn write_report_csv<W: Write>(mut w: W, rows: &[ReportRow]) -> io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.model,
            fmt_sig(r.factor, 9),
            fmt_sig(r.mse_noise, 9),
            fmt_sig(r.mse_fixed, 9),
            fmt_sig(r.mse_adaptive, 9)
        )?;
    }
    Ok(())
}
