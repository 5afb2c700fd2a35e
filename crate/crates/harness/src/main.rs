use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector2;
use sampson::geometry::MixSelection;
use sampson::poly::PolynomialConstraintSystem;
use sampson::sampson::PseudoNorm;
use sampson_harness::config::SceneConfig;
use sampson_harness::error::{HarnessError, Result};
use sampson_harness::experiments::{bounds, point, pose2d3d, relpose, threeview, twoview, vp, RunOptions};
use sampson_harness::io::{load_correspondences, parse_matrix3, parse_numbers};
use sampson_harness::report::{export, ExperimentReport, Format};

/// Sampson and geometric error experiments on synthetic or user data.
#[derive(Parser, Debug)]
#[command(name = "sampson", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of samples (problems or trials for the refinement commands).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Noise levels, comma separated (pixels; scene units for `kappa`).
    #[arg(long, global = true, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// Output file; a summary of the aggregates is printed either way.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Jacobian norm for the pseudo-Sampson variants: frobenius or spectral.
    #[arg(long, global = true, default_value = "frobenius")]
    pseudo_norm: PseudoNorm,
    /// Attach wall-clock timings (the report is then no longer byte-reproducible).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ratio and region flags over a grid around the ellipse x^2 + 2y^2 = 4.
    EllipseMap {
        #[arg(long, default_value_t = 161)]
        grid: usize,
        #[arg(long, default_value_t = 4.0)]
        extent: f64,
    },
    /// Two-view Sampson and symmetric epipolar errors against optimal triangulation.
    TwoView {
        /// Correspondence CSV in pixels; requires --essential and --focal.
        #[arg(long)]
        matches: Option<PathBuf>,
        /// Essential matrix, nine row-major numbers.
        #[arg(long)]
        essential: Option<String>,
        #[arg(long)]
        focal: Option<f64>,
        /// Principal point `cx,cy` in pixels.
        #[arg(long, default_value = "0,0")]
        center: String,
    },
    /// Three-view error approximations against the optimal reprojection error.
    ThreeView {
        /// Rows of C4 kept in C4:3.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        c43_rows: Vec<usize>,
        /// Rows of C4 used in C4:1,3:2.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        c4132_c4_rows: Vec<usize>,
        /// Rows of C3 used in C4:1,3:2.
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        c4132_c3_rows: Vec<usize>,
    },
    /// Segment-to-vanishing-point bounds and VP refinement.
    Vp {
        #[arg(long, default_value_t = 200)]
        pencils: usize,
        /// Skip the general-projector cross-check.
        #[arg(long)]
        no_general: bool,
    },
    /// Absolute pose: Sampson elimination against the full bundle.
    #[command(name = "pose-2d3d")]
    Pose2d3d {
        #[arg(long, default_value_t = 60)]
        points: usize,
    },
    /// Kappa certificates on the sphere intersected with z = xy.
    Kappa {
        #[arg(long, value_delimiter = ',', default_value = "200,500,1000")]
        sizes: Vec<usize>,
    },
    /// Relative pose refinement under four losses from a linear start.
    RefineRelpose {
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// All errors and bounds for one point against a polynomial system file.
    Point {
        #[arg(long)]
        constraints: PathBuf,
        /// Coordinates of the measurement.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        /// Per-coordinate variances.
        #[arg(long, allow_hyphen_values = true)]
        variances: Option<String>,
    },
}

fn sigmas(c: &Common, default: &[f64]) -> Vec<f64> {
    if c.sigma.is_empty() {
        default.to_vec()
    } else {
        c.sigma.clone()
    }
}

fn one_sigma(c: &Common, default: f64) -> Result<f64> {
    match c.sigma.as_slice() {
        [] => Ok(default),
        [s] => Ok(*s),
        _ => Err(HarnessError::InvalidConfig("this command takes a single --sigma".into())),
    }
}

fn scene(c: &Common, n_cameras: usize) -> SceneConfig {
    let d = SceneConfig::default();
    SceneConfig { seed: c.seed, n_cameras, n_samples: c.samples.unwrap_or(d.n_samples), ..d }
}

fn run(cli: &Cli) -> Result<ExperimentReport> {
    let c = &cli.common;
    let opts = RunOptions { threads: c.threads, timings: c.timings };
    match &cli.cmd {
        Command::EllipseMap { grid, extent } => {
            bounds::run_ellipse(&bounds::EllipseConfig { grid: *grid, extent: *extent }, &opts)
        }
        Command::TwoView { matches: Some(path), essential, focal, center } => {
            let e = parse_matrix3(essential.as_deref().ok_or_else(|| missing("--essential"))?)?;
            let f = focal.ok_or_else(|| missing("--focal"))?;
            let cc = parse_numbers(center, Some(2))?;
            let corrs = load_correspondences(path)?;
            twoview::run_matches(&corrs, &e, f, Vector2::new(cc[0], cc[1]), &opts)
        }
        Command::TwoView { .. } => {
            let cfg = twoview::TwoViewConfig { scene: scene(c, 2), sigmas: sigmas(c, &[0.5, 1.0, 2.0]) };
            twoview::run(&cfg, &opts)
        }
        Command::ThreeView { c43_rows, c4132_c4_rows, c4132_c3_rows } => {
            let cfg = threeview::ThreeViewConfig {
                scene: scene(c, 3),
                sigmas: sigmas(c, &[1.0, 5.0, 10.0]),
                pseudo_norm: c.pseudo_norm,
                mix: MixSelection {
                    c43_rows: c43_rows.clone(),
                    c4132_c4_rows: c4132_c4_rows.clone(),
                    c4132_c3_rows: c4132_c3_rows.clone(),
                },
                ..Default::default()
            };
            threeview::run(&cfg, &opts)
        }
        Command::Vp { pencils, no_general } => {
            let d = vp::VpConfig::default();
            let cfg = vp::VpConfig {
                seed: c.seed,
                n_samples: c.samples.unwrap_or(d.n_samples),
                sigma_px: one_sigma(c, d.sigma_px)?,
                n_pencils: *pencils,
                check_general: !no_general,
                ..d
            };
            vp::run(&cfg, &opts)
        }
        Command::Pose2d3d { points } => {
            let d = pose2d3d::PoseConfig::default();
            let sigma = one_sigma(c, d.scene.noise_sigma_px)?;
            let cfg = pose2d3d::PoseConfig {
                scene: SceneConfig { seed: c.seed, noise_sigma_px: sigma, ..d.scene.clone() },
                n_problems: c.samples.unwrap_or(d.n_problems),
                n_points: *points,
                ..d
            };
            pose2d3d::run(&cfg, &opts)
        }
        Command::Kappa { sizes } => {
            let d = bounds::KappaConfig::default();
            let mut sizes = sizes.clone();
            if let Some(n) = c.samples {
                sizes = vec![n];
            }
            let cfg = bounds::KappaConfig { seed: c.seed, noises: sigmas(c, &d.noises), sizes, ..d };
            bounds::run_kappa(&cfg, &opts)
        }
        Command::RefineRelpose { points } => {
            let d = relpose::RelPoseConfig::default();
            let sigma = one_sigma(c, d.scene.noise_sigma_px)?;
            let cfg = relpose::RelPoseConfig {
                scene: SceneConfig { seed: c.seed, noise_sigma_px: sigma, ..d.scene.clone() },
                n_trials: c.samples.unwrap_or(d.n_trials),
                n_points: *points,
            };
            relpose::run(&cfg, &opts)
        }
        Command::Point { constraints, z, variances } => {
            let text = std::fs::read_to_string(constraints)
                .map_err(|source| HarnessError::Io { path: constraints.clone(), source })?;
            let system = PolynomialConstraintSystem::parse(&text)?;
            let cfg = point::PointConfig {
                system,
                z: parse_numbers(z, None)?,
                variances: variances.as_deref().map(|v| parse_numbers(v, None)).transpose()?,
                pseudo_norm: c.pseudo_norm,
            };
            point::run(&cfg)
        }
    }
}

fn missing(flag: &str) -> HarnessError {
    HarnessError::InvalidConfig(format!("{flag} is required with --matches"))
}

/// Prints the aggregates; a closed stdout is not an error.
fn summarize(report: &ExperimentReport) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{}: {} records, {} failures ({:.3}%)",
        report.experiment,
        report.records.len(),
        report.failures.len(),
        100.0 * report.failure_rate()
    );
    for a in &report.aggregates {
        if writeln!(out, "  {:<16} {:<28} {}", a.group, a.name, a.value).is_err() {
            return;
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(path) = &cli.common.out {
        if let Err(e) = export(&report, cli.common.format, path) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    summarize(&report);
    if report.is_degraded() {
        eprintln!(
            "warning: degraded run, {} of {} samples excluded",
            report.failures.len(),
            report.n_requested
        );
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
