//! Normal-deviation neighborhood weighting for point clouds.
//!
//! Per point, neighbors are weighted by a cosine-sigmoid of the angle between
//! normals, a weighted covariance yields linearity, planarity and scattering,
//! and the Shannon entropy of those three values scores how clearly the
//! neighborhood has one dimensionality. [`optimizer`] searches thresholds and
//! neighborhood sizes that minimize that entropy, [`statistics`] aggregates
//! the results, and [`denoise`] uses the same entropy to size neighborhoods
//! during normal filtering.

// `!(x > y)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoise;
pub mod error;
pub mod features;
pub mod geometry;
pub mod numfmt;
pub mod optimizer;
pub mod spatial;
pub mod statistics;
pub mod weighting;

pub use error::{Error, Result};
pub use features::{
    classify, covariance, eigenvalues_sym3, entropy_error, features_lps, is_degenerate, Degeneracy,
    Dimensionality, EigenTriple, FeatureVector, Sym3,
};
pub use geometry::{
    load_cloud, load_geometry, save_cloud, Geometry, MeshFormat, PlyFormat, PointCloud, ShapeSpec,
    TriangleMesh,
};
pub use nalgebra;
pub use optimizer::{
    optimize_cloud, ErrorValue, Evaluator, OptimizationRun, ParameterGrid, PointOptimum, RunInfo,
};
pub use spatial::{mean_knn_distance, NeighborIndex, NeighborList};
pub use weighting::{normal_angle, sigmoid_cos, SigmoidParams};
