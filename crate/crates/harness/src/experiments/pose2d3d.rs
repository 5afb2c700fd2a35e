//! Absolute pose with noisy 2D and 3D observations: Sampson refinement against the full bundle.

use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::Rng;
use sampson::geometry::{CameraPose, Match2D3D};
use sampson::linalg::so3_exp;
use sampson::refine::{refine_full_bundle, refine_pose_sampson, refine_reprojection_only, LmOptions};
use serde::Serialize;
use serde_json::json;

use super::{column, finish, grouped, par_map, RunOptions, Stopwatch};
use crate::config::SceneConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::{absolute_pose_error, median};
use crate::report::{Aggregate, ExperimentReport, Failure, Record};
use crate::scene::{gauss, gauss2, gauss3, random_camera, random_point_in_view, random_unit, sample_rng, Intrinsics, Stream};

pub const NAME: &str = "pose-2d3d";
pub const GROUP: &str = "problems";

/// Methods in report order.
pub const METHODS: [&str; 4] = ["init", "sampson", "bundle", "reproj"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoseConfig {
    pub scene: SceneConfig,
    pub n_problems: usize,
    pub n_points: usize,
    /// Range of per-axis 3D standard deviations, scene units.
    pub sigma3: [f64; 2],
    pub init_rot_deg: f64,
    pub init_trans: f64,
}

impl Default for PoseConfig {
    fn default() -> Self {
        PoseConfig {
            scene: SceneConfig { n_cameras: 2, ..SceneConfig::default() },
            n_problems: 200,
            n_points: 60,
            sigma3: [0.01, 0.05],
            init_rot_deg: 2.0,
            init_trans: 0.1,
        }
    }
}

/// Synthetic localization problem: ground truth, noisy matches and an initial pose.
#[derive(Clone, Debug)]
pub struct PoseProblem {
    pub gt: CameraPose,
    pub init: CameraPose,
    pub matches: Vec<Match2D3D>,
}

/// Random SPD covariance with per-axis standard deviations drawn from `range`.
fn random_cov3(rng: &mut rand_chacha::ChaCha8Rng, range: [f64; 2]) -> Matrix3<f64> {
    let q = so3_exp(&(random_unit(rng) * rng.random_range(0.0..std::f64::consts::PI)));
    let d = Vector3::from_fn(|_, _| rng.random_range(range[0]..=range[1]).powi(2));
    q * Matrix3::from_diagonal(&d) * q.transpose()
}

pub fn gen_problem(cfg: &PoseConfig, index: usize) -> Result<PoseProblem> {
    let k = Intrinsics::from_config(&cfg.scene);
    let mut rng = sample_rng(cfg.scene.seed, Stream::Pose, index as u64);
    let gt = random_camera(&mut rng, &cfg.scene);
    let s2 = cfg.scene.noise_sigma_px / k.focal;
    let sigma2 = Matrix2::identity() * s2.max(1e-12).powi(2);
    let mut matches = Vec::with_capacity(cfg.n_points);
    while matches.len() < cfg.n_points {
        let xc = random_point_in_view(&mut rng, &cfg.scene);
        let xw = gt.rotation().transpose() * (xc - gt.translation());
        let Some(x) = gt.project(&xw) else { continue };
        if !k.inside(&k.to_pixels(&x)) {
            continue;
        }
        let sigma3 = random_cov3(&mut rng, cfg.sigma3);
        let l3 = sigma3.cholesky().ok_or_else(|| HarnessError::InvalidConfig("3D covariance".into()))?.l();
        let xw_noisy = xw + l3 * gauss3(&mut rng);
        let x_noisy = x + gauss2(&mut rng) * s2;
        matches.push(Match2D3D::new(x_noisy, xw_noisy, sigma2, sigma3)?);
    }
    let w = random_unit(&mut rng) * cfg.init_rot_deg.to_radians() * (1.0 + 0.1 * gauss(&mut rng)).abs();
    let dt = random_unit(&mut rng) * cfg.init_trans;
    Ok(PoseProblem { gt, init: gt.perturbed(&w, &dt), matches })
}

fn set_error(r: &mut Record, method: &str, est: &CameraPose, gt: &CameraPose) {
    let e = absolute_pose_error(est, gt);
    r.set(&format!("rot_{method}_deg"), e.rot_deg).set(&format!("trans_{method}_cm"), e.trans);
}

/// Solves one problem with every method; also returns wall-clock milliseconds for sampson, bundle, reproj.
pub fn solve(cfg: &PoseConfig, index: usize) -> std::result::Result<(Record, [f64; 3]), Failure> {
    let fail = |reason: String| Failure { sample: index, group: GROUP.into(), reason };
    let p = gen_problem(cfg, index).map_err(|e| fail(e.to_string()))?;
    let opts = LmOptions::default();
    let sw = Stopwatch::start();
    let s = refine_pose_sampson(&p.init, &p.matches, &opts).map_err(|e| fail(format!("sampson: {e}")))?;
    let ts = sw.ms();
    let sw = Stopwatch::start();
    let b = refine_full_bundle(&p.init, &p.matches, &opts).map_err(|e| fail(format!("bundle: {e}")))?;
    let tb = sw.ms();
    let sw = Stopwatch::start();
    let q = refine_reprojection_only(&p.init, &p.matches, &opts).map_err(|e| fail(format!("reproj: {e}")))?;
    let tq = sw.ms();
    let mut r = Record::new(index, GROUP);
    set_error(&mut r, "init", &p.init, &p.gt);
    set_error(&mut r, "sampson", &s.params, &p.gt);
    set_error(&mut r, "bundle", &b.params.pose, &p.gt);
    set_error(&mut r, "reproj", &q.params, &p.gt);
    r.set("iters_sampson", s.summary.iterations as f64).set("iters_bundle", b.summary.iterations as f64);
    r.set("params_bundle", b.summary.n_params as f64);
    Ok((r, [ts, tb, tq]))
}

pub fn run(cfg: &PoseConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.scene.validate()?;
    if cfg.n_points < 3 {
        return Err(HarnessError::InvalidConfig("at least three 2D/3D matches are needed".into()));
    }
    let mut report = ExperimentReport::new(NAME, cfg.scene.seed, json!(cfg));
    report.metadata.insert("translation_units".into(), "cm (scene units taken as metres)".into());
    let out = par_map(opts, cfg.n_problems, |i| solve(cfg, i))?;
    let mut totals = [0.0; 3];
    let outcomes: Vec<_> = out
        .into_iter()
        .map(|o| {
            o.map(|(r, t)| {
                for (a, b) in totals.iter_mut().zip(t) {
                    *a += b;
                }
                r
            })
        })
        .collect();
    report.extend_outcomes(outcomes);
    if opts.timings {
        report.add_timing("sampson", totals[0]);
        report.add_timing("bundle", totals[1]);
        report.add_timing("reproj", totals[2]);
    }
    finish(report)
}

pub fn aggregate(records: &[Record]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    for (g, rs) in grouped(records) {
        for m in METHODS {
            for (key, unit) in [("rot", "deg"), ("trans", "cm")] {
                let name = format!("{key}_{m}_{unit}");
                if let Some(v) = median(&column(&rs, &name)) {
                    out.push(Aggregate { group: g.clone(), name: format!("median_{name}"), value: v });
                }
            }
        }
        out.push(Aggregate { group: g.clone(), name: "n_records".into(), value: rs.len() as f64 });
    }
    Ok(out)
}
