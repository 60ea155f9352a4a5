use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sigweight::denoise::FilterMode;
use sigweight::{ParameterGrid, PlyFormat};

#[derive(Debug, Parser)]
#[command(name = "sigweight", version, about = "Normal-deviation neighborhood weighting for point clouds")]
pub struct Cli {
    /// Worker threads (0 picks one per core).
    #[arg(long, global = true, env = "SIGWEIGHT_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write a synthetic shape with exact normals.
    Gen(GenArgs),
    /// Re-encode OBJ or PLY input as PLY with normals.
    Convert(ConvertArgs),
    /// Per-point entropy and class for one (a, b, k).
    Classify(ClassifyArgs),
    /// Per-point optimal (a*, b*, k*) over a grid.
    Optimize(OptimizeArgs),
    /// Optimize one or more models and write the aggregate report.
    Stats(StatsArgs),
    /// Displace points along their normals by Gaussian noise.
    AddNoise(AddNoiseArgs),
    /// Filter normals, or with --report tabulate MSE over noise levels.
    Denoise(DenoiseArgs),
    /// Mean squared difference between two normal fields.
    Mse(MseArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Plane,
    Line,
    Cube,
    Sphere,
    Dihedral,
    Ball,
    /// Triangulated cube surface; the PLY carries faces.
    CubeMesh,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Plane => "plane",
            Shape::Line => "line",
            Shape::Cube => "cube",
            Shape::Sphere => "sphere",
            Shape::Dihedral => "dihedral",
            Shape::Ball => "ball",
            Shape::CubeMesh => "cube-mesh",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Ascii,
    Binary,
}

impl From<Format> for PlyFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Ascii => PlyFormat::Ascii,
            Format::Binary => PlyFormat::BinaryLittleEndian,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub shape: Shape,
    /// Approximate point count.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Merge points closer than this distance (0 merges exact duplicates).
    #[arg(long)]
    pub dedup: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    pub format: Format,
}

/// Parses radians, `Xpi` or `pi`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let value = if let Some(coef) = t.strip_suffix("pi") {
        let coef = coef.trim();
        let c = if coef.is_empty() {
            1.0
        } else {
            coef.parse::<f64>().map_err(|e| format!("bad angle {s:?}: {e}"))?
        };
        c * PI
    } else {
        t.parse::<f64>().map_err(|e| format!("bad angle {s:?}: {e}"))?
    };
    if !(0.0..=PI).contains(&value) {
        return Err(format!("angle {s:?} outside [0, pi]"));
    }
    Ok(value)
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_angle)]
    pub a: f64,
    #[arg(long, value_parser = parse_angle)]
    pub b: f64,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridPreset {
    Default,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, value_enum, default_value_t = GridPreset::Default)]
    pub grid: GridPreset,
    /// Override the lower thresholds, e.g. `0,0.5pi,pi`.
    #[arg(long = "A", value_delimiter = ',', value_parser = parse_angle)]
    pub a: Option<Vec<f64>>,
    /// Override the upper thresholds.
    #[arg(long = "B", value_delimiter = ',', value_parser = parse_angle)]
    pub b: Option<Vec<f64>>,
    /// Override the neighbor counts, e.g. `6,8,10`.
    #[arg(long = "K", value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
}

impl GridArgs {
    pub fn build(&self) -> sigweight::Result<ParameterGrid> {
        let base = match self.grid {
            GridPreset::Default => ParameterGrid::default_grid(),
        };
        if self.a.is_none() && self.b.is_none() && self.k.is_none() {
            return Ok(base);
        }
        ParameterGrid::new(
            self.a.clone().unwrap_or_else(|| base.a_values().to_vec()),
            self.b.clone().unwrap_or_else(|| base.b_values().to_vec()),
            self.k.clone().unwrap_or_else(|| base.k_values().to_vec()),
        )
    }
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// One or more models; repeat the flag.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Corpus name in the report (defaults to the first file stem).
    #[arg(long)]
    pub corpus: Option<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `ab_hist.svg` and `k_hist.svg` here.
    #[arg(long)]
    pub svg_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalSource {
    /// Re-estimate from the displaced geometry (mesh faces or PCA).
    Recompute,
    /// Keep the input normals.
    Keep,
}

#[derive(Debug, Args, Serialize)]
pub struct AddNoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise standard deviation in units of the mean 6-NN spacing.
    #[arg(long)]
    pub factor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = NormalSource::Recompute)]
    pub normals: NormalSource,
    /// Neighbors for PCA normals when the input has no faces.
    #[arg(long, default_value_t = 10)]
    pub pca_k: usize,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Fixed,
    Adaptive,
}

impl From<Mode> for FilterMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Fixed => FilterMode::Fixed,
            Mode::Adaptive => FilterMode::Adaptive,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DenoiseArgs {
    /// Noisy cloud to filter, or clean models with --report.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 150)]
    pub p: usize,
    #[arg(long, default_value_t = 0.95)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.3)]
    pub rho: f64,
    #[arg(long, default_value_t = 15)]
    pub k_default: usize,
    #[arg(long, default_value_t = 10)]
    pub halfwidth: usize,
    #[arg(long, value_enum, default_value_t = Mode::Adaptive)]
    pub mode: Mode,
    /// Write the MSE table for noise, fixed and adaptive filtering instead.
    #[arg(long)]
    pub report: bool,
    /// Noise factors for --report.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.6])]
    pub factors: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub pca_k: usize,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct MseArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Also write the value as a one-column CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
