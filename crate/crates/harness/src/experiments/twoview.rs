//! Two-view Sampson and symmetric epipolar errors against optimal triangulation.

use nalgebra::{DMatrix, Matrix3, Vector2};
use sampson::bounds::spectral_radius;
use sampson::geometry::{epipolar_constraint, epipolar_hessian, essential_from_pose, twoview_losses};
use sampson::oracle::triangulate_optimal_twoview;
use serde_json::json;

use super::{column, finish, grouped, par_map, RunOptions, Stopwatch};
use crate::config::SceneConfig;
use crate::error::{HarnessError, Result};
use crate::io::Correspondence;
use crate::metrics::{auc, spearman};
use crate::report::{Aggregate, ExperimentReport, Failure, Record};
use crate::scene::{gen_sample, Intrinsics};

pub const NAME: &str = "two-view";

/// AUC thresholds in pixels.
pub const THRESHOLDS_PX: [f64; 3] = [0.1, 0.5, 1.0];

/// Group holding every record, used for the rank correlation.
pub const ALL: &str = "all";

#[derive(Clone, Debug)]
pub struct TwoViewConfig {
    pub scene: SceneConfig,
    pub sigmas: Vec<f64>,
}

impl Default for TwoViewConfig {
    fn default() -> Self {
        TwoViewConfig { scene: SceneConfig { n_cameras: 2, ..SceneConfig::default() }, sigmas: vec![0.5, 1.0, 2.0] }
    }
}

pub fn group_name(sigma: f64) -> String {
    format!("sigma={sigma}")
}

/// Errors of one correspondence in normalized coordinates, reported in pixels via `focal`.
pub fn evaluate(x1: &Vector2<f64>, x2: &Vector2<f64>, e: &Matrix3<f64>, focal: f64, r: &mut Record) -> sampson::Result<()> {
    let l = twoview_losses(x1, x2, e);
    let gt = triangulate_optimal_twoview(x1, x2, e)?.error * focal;
    let (c, j) = epipolar_constraint(x1, x2, e);
    let h = epipolar_hessian(e);
    let rho = spectral_radius(&DMatrix::from_column_slice(4, 4, h.as_slice()));
    let (es, esym) = (l.sampson * focal, l.sym_epipolar * focal);
    r.set("sampson", es)
        .set("sym_epipolar", esym)
        .set("gt", gt)
        .set("gap_sampson", (es - gt).abs())
        .set("gap_sym", (esym - gt).abs());
    let jn2 = j.norm_squared();
    if jn2 > 0.0 {
        r.set("curvature_ratio", rho * c.abs() / jn2);
    }
    Ok(())
}

pub fn evaluate_sample(cfg: &TwoViewConfig, sigma: f64, index: usize) -> std::result::Result<Record, Failure> {
    let group = group_name(sigma);
    let fail = |reason: String| Failure { sample: index, group: group.clone(), reason };
    let scene = cfg.scene.with_sigma(sigma);
    let k = Intrinsics::from_config(&scene);
    let s = gen_sample(&scene, index).map_err(|e| fail(e.to_string()))?;
    let x = s.noisy_normalized(&k);
    let e = essential_from_pose(&s.cameras[0].relative_to(&s.cameras[1])).map_err(|e| fail(e.to_string()))?;
    let mut r = Record::new(index, group.clone());
    evaluate(&x[0], &x[1], e.normalized().matrix(), k.focal, &mut r).map_err(|e| fail(e.to_string()))?;
    Ok(r)
}

pub fn run(cfg: &TwoViewConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.scene.validate()?;
    if cfg.scene.n_cameras != 2 {
        return Err(HarnessError::InvalidConfig("two-view needs two cameras".into()));
    }
    let echo = json!({ "scene": cfg.scene, "sigmas": cfg.sigmas, "thresholds_px": THRESHOLDS_PX });
    let mut report = ExperimentReport::new(NAME, cfg.scene.seed, echo);
    report.metadata.insert("focal_px".into(), cfg.scene.focal().to_string());
    for &sigma in &cfg.sigmas {
        let sw = Stopwatch::start();
        let out = par_map(opts, cfg.scene.n_samples, |i| evaluate_sample(cfg, sigma, i))?;
        if opts.timings {
            report.add_timing(&group_name(sigma), sw.ms());
        }
        report.extend_outcomes(out);
    }
    finish(report)
}

/// Evaluates user correspondences (pixels) against a given essential matrix and pinhole intrinsics.
pub fn run_matches(
    corrs: &[Correspondence],
    e: &Matrix3<f64>,
    focal: f64,
    center: Vector2<f64>,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let echo = json!({ "n_matches": corrs.len(), "focal_px": focal, "center_px": [center.x, center.y],
        "essential": e.transpose().as_slice(), "thresholds_px": THRESHOLDS_PX });
    let mut report = ExperimentReport::new(NAME, 0, echo);
    report.metadata.insert("source".into(), "matches".into());
    let out = par_map(opts, corrs.len(), |i| {
        let c = &corrs[i];
        let x1 = (c.x1 - center) / focal;
        let x2 = (c.x2 - center) / focal;
        let mut r = Record::new(i, "matches");
        evaluate(&x1, &x2, e, focal, &mut r)
            .map(|_| r)
            .map_err(|err| Failure { sample: i, group: "matches".into(), reason: err.to_string() })
    })?;
    report.extend_outcomes(out);
    finish(report)
}

pub fn aggregate(records: &[Record]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Aggregate>, group: &str, rs: &[&Record]| -> Result<()> {
        let (gs, gy) = (column(rs, "gap_sampson"), column(rs, "gap_sym"));
        for tau in THRESHOLDS_PX {
            if !gs.is_empty() {
                out.push(Aggregate { group: group.into(), name: format!("auc_sampson@{tau}"), value: auc(&gs, tau)? });
            }
            if !gy.is_empty() {
                out.push(Aggregate { group: group.into(), name: format!("auc_sym@{tau}"), value: auc(&gy, tau)? });
            }
        }
        let pairs: Vec<(f64, f64)> =
            rs.iter().filter_map(|r| Some((r.get("curvature_ratio")?, r.get("gap_sampson")?))).collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Some(s) = spearman(&x, &y) {
            out.push(Aggregate { group: group.into(), name: "spearman_curvature_gap".into(), value: s });
        }
        out.push(Aggregate { group: group.into(), name: "n_records".into(), value: rs.len() as f64 });
        Ok(())
    };
    let groups = grouped(records);
    for (g, rs) in &groups {
        push(&mut out, g, rs)?;
    }
    if groups.len() > 1 {
        let all: Vec<&Record> = records.iter().collect();
        push(&mut out, ALL, &all)?;
    }
    Ok(out)
}
