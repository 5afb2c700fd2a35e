//! Relative pose refinement from a linear initialization under several epipolar losses.

use nalgebra::Vector2;
use sampson::geometry::{decompose_essential, essential_dlt, CameraPose};
use sampson::refine::{refine_essential_from_pose, EssentialLoss, LmOptions};
use serde::Serialize;
use serde_json::json;

use super::{column, finish, grouped, par_map, RunOptions, Stopwatch};
use crate::config::SceneConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::{median, pose_error};
use crate::report::{Aggregate, ExperimentReport, Failure, Record};
use crate::scene::{gauss2, random_camera, random_point_in_view, sample_rng, Intrinsics, Stream};

pub const NAME: &str = "refine-relpose";
pub const GROUP: &str = "trials";

/// Methods in report order; `dlt` is the unrefined initialization.
pub const METHODS: [&str; 5] = ["sampson", "sym_epipolar", "cosine", "algebraic", "dlt"];

const LOSSES: [(&str, EssentialLoss); 4] = [
    ("sampson", EssentialLoss::Sampson),
    ("sym_epipolar", EssentialLoss::SymEpipolar),
    ("cosine", EssentialLoss::Cosine),
    ("algebraic", EssentialLoss::Algebraic),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelPoseConfig {
    pub scene: SceneConfig,
    pub n_trials: usize,
    pub n_points: usize,
}

impl Default for RelPoseConfig {
    fn default() -> Self {
        RelPoseConfig {
            scene: SceneConfig { n_cameras: 2, n_samples: 500, ..SceneConfig::default() },
            n_trials: 500,
            n_points: 100,
        }
    }
}

/// Ground-truth relative pose and noisy normalized correspondences.
pub fn gen_trial(cfg: &RelPoseConfig, index: usize) -> (CameraPose, Vec<(Vector2<f64>, Vector2<f64>)>) {
    let k = Intrinsics::from_config(&cfg.scene);
    let mut rng = sample_rng(cfg.scene.seed, Stream::Refine, index as u64);
    let cam = random_camera(&mut rng, &cfg.scene);
    let s = cfg.scene.noise_sigma_px / k.focal;
    let mut corrs = Vec::with_capacity(cfg.n_points);
    while corrs.len() < cfg.n_points {
        let x = random_point_in_view(&mut rng, &cfg.scene);
        let (Some(a), Some(b)) = (CameraPose::identity().project(&x), cam.project(&x)) else { continue };
        if !k.inside(&k.to_pixels(&a)) || !k.inside(&k.to_pixels(&b)) {
            continue;
        }
        corrs.push((a + gauss2(&mut rng) * s, b + gauss2(&mut rng) * s));
    }
    (cam, corrs)
}

/// Pose error in radians: the larger of the rotation angle and the translation direction angle.
fn err_rad(est: &CameraPose, gt: &CameraPose) -> f64 {
    pose_error(est, gt).max.to_radians()
}

pub fn solve(cfg: &RelPoseConfig, index: usize) -> std::result::Result<Record, Failure> {
    let fail = |reason: String| Failure { sample: index, group: GROUP.into(), reason };
    let (gt, corrs) = gen_trial(cfg, index);
    let e0 = essential_dlt(&corrs).map_err(|e| fail(format!("dlt: {e}")))?;
    let pose0 = decompose_essential(&e0, &corrs).map_err(|e| fail(format!("decompose: {e}")))?;
    let opts = LmOptions::default();
    let mut r = Record::new(index, GROUP);
    r.set("err_dlt_rad", err_rad(&pose0, &gt));
    for (name, loss) in LOSSES {
        let out = refine_essential_from_pose(&pose0, &corrs, loss, &opts).map_err(|e| fail(format!("{name}: {e}")))?;
        r.set(&format!("err_{name}_rad"), err_rad(&out.pose, &gt));
    }
    Ok(r)
}

pub fn run(cfg: &RelPoseConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.scene.validate()?;
    if cfg.n_points < 8 {
        return Err(HarnessError::InvalidConfig("the linear initialization needs at least 8 points".into()));
    }
    let mut report = ExperimentReport::new(NAME, cfg.scene.seed, json!(cfg));
    report.metadata.insert("error_units".into(), "radians".into());
    let sw = Stopwatch::start();
    report.extend_outcomes(par_map(opts, cfg.n_trials, |i| solve(cfg, i))?);
    if opts.timings {
        report.add_timing(GROUP, sw.ms());
    }
    finish(report)
}

pub fn aggregate(records: &[Record]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    for (g, rs) in grouped(records) {
        for m in METHODS {
            if let Some(v) = median(&column(&rs, &format!("err_{m}_rad"))) {
                out.push(Aggregate { group: g.clone(), name: format!("median_err_{m}_rad"), value: v });
            }
        }
        out.push(Aggregate { group: g.clone(), name: "n_records".into(), value: rs.len() as f64 });
    }
    Ok(out)
}
