//! Three-view reprojection-error approximations against optimal triangulation.

use nalgebra::Vector2;
use sampson::geometry::{essential_from_pose, threeview_systems, trifocal_from_cameras, MixSelection, ThreeViewErrors};
use sampson::oracle::{triangulate_threeview, ThreeViewOptions};
use sampson::sampson::PseudoNorm;
use serde_json::json;

use super::{column, finish, grouped, par_map, RunOptions, Stopwatch};
use crate::config::SceneConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::auc;
use crate::report::{Aggregate, ExperimentReport, Failure, Record};
use crate::scene::{gen_sample, Intrinsics};

pub const NAME: &str = "three-view";

/// Error variants in report order.
pub const VARIANTS: [&str; 10] =
    ["e3", "e4132", "e43", "e4", "pair", "pair_sum", "pseudo3", "pseudo4", "pseudo9", "e9"];

/// AUC threshold in pixels.
pub const AUC_TAU_PX: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct ThreeViewConfig {
    pub scene: SceneConfig,
    pub sigmas: Vec<f64>,
    pub pseudo_norm: PseudoNorm,
    pub mix: MixSelection,
    pub oracle: ThreeViewOptions,
}

impl Default for ThreeViewConfig {
    fn default() -> Self {
        ThreeViewConfig {
            scene: SceneConfig { n_cameras: 3, ..SceneConfig::default() },
            sigmas: vec![1.0, 5.0, 10.0],
            pseudo_norm: PseudoNorm::Frobenius,
            mix: MixSelection::default(),
            oracle: ThreeViewOptions::default(),
        }
    }
}

pub fn group_name(sigma: f64) -> String {
    format!("sigma={sigma}")
}

/// All error variants and the optimal reprojection error for one sample, in pixels.
pub fn evaluate_sample(cfg: &ThreeViewConfig, sigma: f64, index: usize) -> std::result::Result<Record, Failure> {
    let group = group_name(sigma);
    let fail = |reason: String| Failure { sample: index, group: group.clone(), reason };
    let scene = cfg.scene.with_sigma(sigma);
    let k = Intrinsics::from_config(&scene);
    let s = gen_sample(&scene, index).map_err(|e| fail(e.to_string()))?;
    let xn = s.noisy_normalized(&k);
    let xs: [Vector2<f64>; 3] = [xn[0], xn[1], xn[2]];
    let cams = [s.cameras[0].matrix(), s.cameras[1].matrix(), s.cameras[2].matrix()];
    let inner = || -> sampson::Result<Record> {
        let t = trifocal_from_cameras(&cams[0], &cams[1], &cams[2])?;
        let ess = |a: usize, b: usize| -> sampson::Result<_> {
            Ok(*essential_from_pose(&s.cameras[a].relative_to(&s.cameras[b]))?.normalized().matrix())
        };
        let sys = threeview_systems(&xs, &t, &ess(0, 1)?, &ess(0, 2)?, &ess(1, 2)?, &cfg.mix)?;
        let errs = ThreeViewErrors::compute(&sys, cfg.pseudo_norm)?.scaled(k.focal);
        let gt = triangulate_threeview(&xs, &cams, &cfg.oracle)?;
        let gt_px = gt.error * k.focal;
        let mut r = Record::new(index, group.clone());
        r.set("gt", gt_px).flag("behind_camera", gt.behind_camera);
        for (name, v) in errs.named() {
            r.set(name, v);
            r.set(&format!("diff_{name}"), (v - gt_px).abs());
        }
        Ok(r)
    };
    inner().map_err(|e| fail(e.to_string()))
}

pub fn run(cfg: &ThreeViewConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.scene.validate()?;
    if cfg.scene.n_cameras != 3 {
        return Err(HarnessError::InvalidConfig("three-view needs three cameras".into()));
    }
    cfg.mix.validate()?;
    let echo = json!({
        "scene": cfg.scene,
        "sigmas": cfg.sigmas,
        "pseudo_norm": cfg.pseudo_norm.to_string(),
        "mix": cfg.mix.to_string(),
        "oracle": { "max_iters": cfg.oracle.max_iters, "restarts": cfg.oracle.restarts, "seed": cfg.oracle.seed },
        "auc_tau_px": AUC_TAU_PX,
    });
    let mut report = ExperimentReport::new(NAME, cfg.scene.seed, echo);
    report.metadata.insert("mix_selection".into(), cfg.mix.to_string());
    report.metadata.insert("pseudo_norm".into(), cfg.pseudo_norm.to_string());
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

pub fn aggregate(records: &[Record]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    for (group, rs) in grouped(records) {
        for name in VARIANTS {
            let d = column(&rs, &format!("diff_{name}"));
            if !d.is_empty() {
                out.push(Aggregate { group: group.clone(), name: format!("auc_{name}"), value: auc(&d, AUC_TAU_PX)? });
            }
        }
        out.push(Aggregate { group: group.clone(), name: "n_records".into(), value: rs.len() as f64 });
    }
    Ok(out)
}
