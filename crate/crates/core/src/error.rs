use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    FaceIndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },

    #[error("face {face} is degenerate (repeated vertex index)")]
    DegenerateFace { face: usize },

    #[error("incident face normals cancel at vertex {vertex}")]
    ZeroNormal { vertex: usize },

    #[error("normal {index} is not unit length (|n| = {length})")]
    NonUnitNormal { index: usize, length: f64 },

    #[error("points ({points}) and normals ({normals}) differ in length")]
    LengthMismatch { points: usize, normals: usize },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("requested {requested} neighbors but only {available} other points exist")]
    TooFewPoints { requested: usize, available: usize },

    #[error("point index {index} out of range for cloud of {len} points")]
    PointOutOfRange { index: usize, len: usize },

    #[error("angle {0} is outside [0, pi]")]
    AngleOutOfRange(f64),

    #[error("invalid sigmoid parameters a = {a}, b = {b}: need 0 <= a <= b <= pi")]
    InvalidParams { a: f64, b: f64 },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("largest eigenvalue is zero; dimensionality features are undefined")]
    DegenerateEigenvalues,

    #[error("invalid parameter grid: {0}")]
    InvalidGrid(String),

    #[error("sample count {0} is below the minimum of 2")]
    TooFewSamples(usize),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("every evaluated error value is degenerate")]
    AllDegenerate,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("missing degeneracy record for point {0}")]
    MissingDegeneracyRecord(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
