//! `sigweight`: batch front end for weighting, optimization, statistics and
//! normal filtering on point clouds.

mod args;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use sigweight::denoise::{
    self, filter_normals, noisy_with_normals, write_report_csv, FilterConfig, NoiseSpec, Renormal,
    ReportModel,
};
use sigweight::geometry::synthetic::cube_mesh;
use sigweight::geometry::{generate_synthetic, load_geometry, write_ply, Geometry, PlyFormat};
use sigweight::optimizer::{optimize_cloud, write_optima_csv, Evaluator};
use sigweight::statistics::{ab_histogram, build_summary, k_histogram, ab_histogram_svg, k_histogram_svg, ModelRun};
use sigweight::{NeighborIndex, PointCloud, ShapeSpec, SigmoidParams};

use args::{Cli, Command, NormalSource, Shape};
use output::{write_atomic, Manifest};

/// Failures sorted by exit code.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<sigweight::Error>(),
                Some(
                    sigweight::Error::InvalidParams { .. }
                        | sigweight::Error::InvalidGrid(_)
                        | sigweight::Error::InvalidConfig(_)
                        | sigweight::Error::InvalidShape(_)
                        | sigweight::Error::TooFewSamples(_)
                )
            )
        });
        if usage {
            Failure::Usage(e)
        } else {
            Failure::Data(e)
        }
    }
}

impl From<sigweight::Error> for Failure {
    fn from(e: sigweight::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let threads = cli.threads;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pool.install(|| run(&cli, pool.current_num_threads()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Data(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

struct Run<'a> {
    cli: &'a Cli,
    threads: usize,
    start: Instant,
}

impl Run<'_> {
    fn manifest(&self, command: &str, inputs: &[PathBuf]) -> Outcome<Manifest> {
        Ok(Manifest::new(
            command,
            &self.cli.command,
            inputs,
            self.threads,
            self.start.elapsed().as_secs_f64(),
        )
        .context("hashing inputs")?)
    }

    fn emit(&self, path: &Path, bytes: &[u8], command: &str, inputs: &[PathBuf]) -> Outcome {
        write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        let manifest = self.manifest(command, inputs)?;
        manifest
            .write_beside(path)
            .with_context(|| format!("writing manifest for {}", path.display()))?;
        Ok(())
    }
}

fn run(cli: &Cli, threads: usize) -> Outcome {
    let ctx = Run {
        cli,
        threads,
        start: Instant::now(),
    };
    match &cli.command {
        Command::Gen(a) => {
            let (points, normals, faces) = match a.shape {
                Shape::CubeMesh => {
                    let s = (((a.samples.saturating_sub(2)) as f64 / 6.0).sqrt().round() as usize).max(1);
                    let mesh = cube_mesh(s, 1.0)?;
                    let normals = mesh.compute_vertex_normals()?;
                    (mesh.vertices, normals, mesh.faces)
                }
                shape => {
                    let cloud = generate_synthetic(&ShapeSpec::from_name(shape.name(), a.samples)?)?;
                    let (p, n) = cloud.into_parts();
                    (p, n, Vec::new())
                }
            };
            let bytes = ply_bytes(&points, &normals, &faces, a.format.into())?;
            ctx.emit(&a.out, &bytes, "gen", &[])
        }
        Command::Convert(a) => {
            let geometry = read_geometry(&a.input)?;
            let cloud = geometry.to_cloud()?;
            let (cloud, faces) = match a.dedup {
                Some(tol) => {
                    let (deduped, removed) = cloud.dedup(tol);
                    if removed > 0 {
                        log::warn!("removed {removed} duplicate points; faces dropped");
                    }
                    (deduped, Vec::new())
                }
                None => (cloud, geometry.faces),
            };
            let bytes = ply_bytes(cloud.points(), cloud.normals(), &faces, a.format.into())?;
            ctx.emit(&a.out, &bytes, "convert", std::slice::from_ref(&a.input))
        }
        Command::Classify(a) => {
            let cloud = read_cloud(&a.input)?;
            let params = SigmoidParams::new(a.a, a.b)?;
            let index = NeighborIndex::build(&cloud)?;
            let evaluator = Evaluator::new(&cloud, &index);
            use rayon::prelude::*;
            let rows = (0..cloud.len())
                .into_par_iter()
                .map(|i| evaluator.classify_point(i, &params, a.k))
                .collect::<sigweight::Result<Vec<_>>>()?;
            let mut buf = Vec::new();
            write_optima_csv(&mut buf, &cloud, &rows).context("formatting CSV")?;
            ctx.emit(&a.out, &buf, "classify", std::slice::from_ref(&a.input))
        }
        Command::Optimize(a) => {
            let cloud = read_cloud(&a.input)?;
            let grid = a.grid.build()?;
            let run = optimize_cloud(&cloud, &grid)?;
            let mut buf = Vec::new();
            write_optima_csv(&mut buf, &cloud, &run.optima).context("formatting CSV")?;
            ctx.emit(&a.out, &buf, "optimize", std::slice::from_ref(&a.input))
        }
        Command::Stats(a) => stats(&ctx, a),
        Command::AddNoise(a) => {
            let geometry = read_geometry(&a.input)?;
            let clean = geometry.to_cloud()?;
            let spec = NoiseSpec::new(a.factor, a.seed)?;
            let noisy = match a.normals {
                NormalSource::Keep => denoise::add_normal_noise(&clean, &spec)?,
                NormalSource::Recompute => {
                    noisy_with_normals(&clean, &spec, &renormal_for(&geometry, a.pca_k))?
                }
            };
            let bytes = ply_bytes(noisy.points(), noisy.normals(), &geometry.faces, a.format.into())?;
            ctx.emit(&a.out, &bytes, "add-noise", std::slice::from_ref(&a.input))
        }
        Command::Denoise(a) => {
            let config = FilterConfig {
                p: a.p,
                tau: a.tau,
                rho: a.rho,
                k_default: a.k_default,
                halfwidth: a.halfwidth,
            };
            config.validate()?;
            if a.report {
                let mut models = Vec::with_capacity(a.inputs.len());
                for path in &a.inputs {
                    let geometry = read_geometry(path)?;
                    models.push(ReportModel {
                        name: model_name(path),
                        clean: geometry.to_cloud()?,
                        renormal: renormal_for(&geometry, a.pca_k),
                    });
                }
                let rows = denoise::denoise_report(&models, &a.factors, a.seed, &config)?;
                let mut buf = Vec::new();
                write_report_csv(&mut buf, &rows).context("formatting CSV")?;
                ctx.emit(&a.out, &buf, "denoise", &a.inputs)
            } else {
                let [input] = a.inputs.as_slice() else {
                    return Err(Failure::Usage(anyhow::anyhow!(
                        "filtering takes exactly one --in (use --report for several)"
                    )));
                };
                let geometry = read_geometry(input)?;
                let cloud = geometry.to_cloud()?;
                let normals = filter_normals(&cloud, &config, a.mode.into())?;
                let bytes = ply_bytes(cloud.points(), &normals, &geometry.faces, a.format.into())?;
                ctx.emit(&a.out, &bytes, "denoise", &a.inputs)
            }
        }
        Command::Mse(a) => {
            let truth = read_cloud(&a.truth)?;
            let test = read_cloud(&a.test)?;
            let value = denoise::mse(truth.normals(), test.normals())?;
            let line = format!("{}\n", sigweight::numfmt::fmt_sig(value, 9));
            print!("{line}");
            if let Some(out) = &a.out {
                ctx.emit(out, format!("mse\n{line}").as_bytes(), "mse", &[a.truth.clone(), a.test.clone()])?;
            }
            Ok(())
        }
    }
}

fn stats(ctx: &Run<'_>, a: &args::StatsArgs) -> Outcome {
    let grid = a.grid.build()?;
    let mut clouds = Vec::with_capacity(a.inputs.len());
    let mut runs = Vec::with_capacity(a.inputs.len());
    for path in &a.inputs {
        let cloud = read_cloud(path)?;
        runs.push(optimize_cloud(&cloud, &grid)?.optima);
        clouds.push(cloud);
    }
    let models: Vec<ModelRun<'_>> = clouds
        .iter()
        .zip(&runs)
        .map(|(cloud, optima)| ModelRun { cloud, optima })
        .collect();
    let corpus = a.corpus.clone().unwrap_or_else(|| model_name(&a.inputs[0]));
    let summary = build_summary(&corpus, &models, &grid)?;
    let mut json = serde_json::to_vec_pretty(&summary).context("serializing summary")?;
    json.push(b'\n');
    ctx.emit(&a.out, &json, "stats", &a.inputs)?;

    if let Some(dir) = &a.svg_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let pooled: Vec<_> = runs.concat();
        let ab = ab_histogram(&pooled, &grid)?;
        let kh = k_histogram(&pooled, &grid)?;
        ctx.emit(&dir.join("ab_hist.svg"), ab_histogram_svg(&ab).as_bytes(), "stats", &a.inputs)?;
        ctx.emit(&dir.join("k_hist.svg"), k_histogram_svg(&kh).as_bytes(), "stats", &a.inputs)?;
    }
    Ok(())
}

fn read_geometry(path: &Path) -> Outcome<Geometry> {
    Ok(load_geometry(path).with_context(|| format!("reading {}", path.display()))?)
}

fn read_cloud(path: &Path) -> Outcome<PointCloud> {
    Ok(read_geometry(path)?
        .to_cloud()
        .with_context(|| format!("building point cloud from {}", path.display()))?)
}

fn renormal_for(geometry: &Geometry, pca_k: usize) -> Renormal {
    if geometry.faces.is_empty() {
        Renormal::Pca { k: pca_k }
    } else {
        Renormal::Mesh(geometry.faces.clone())
    }
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn ply_bytes(
    points: &[sigweight::nalgebra::Point3<f64>],
    normals: &[sigweight::nalgebra::Vector3<f64>],
    faces: &[[usize; 3]],
    format: PlyFormat,
) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    write_ply(&mut buf, points, Some(normals), faces, format).context("formatting PLY")?;
    Ok(buf)
}
