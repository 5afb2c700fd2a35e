//! Segment-to-vanishing-point errors, their bounds, and VP refinement.

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sampson::geometry::{vp_bounds, vp_poly};
use sampson::oracle::{project_general, ProjectOptions};
use sampson::poly::PolynomialConstraintSystem;
use sampson::refine::{refine_vp, LmOptions, VpLoss};
use sampson::sampson::Covariance;
use serde::Serialize;
use serde_json::json;

use super::{column, finish, grouped, par_map, RunOptions, Stopwatch};
use crate::error::{HarnessError, Result};
use crate::metrics::median;
use crate::report::{Aggregate, ExperimentReport, Failure, Record};
use crate::scene::{gauss2, gauss3, random_unit, sample_rng, Stream};

pub const NAME: &str = "vp";
pub const SEGMENTS: &str = "segments";
pub const REFINE: &str = "refine";

/// Relative slack on the bound sandwich.
pub const SANDWICH_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VpConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub sigma_px: f64,
    pub fov_deg: f64,
    pub image_size: u32,
    /// Segment length range in pixels.
    pub length_px: [f64; 2],
    /// Cross-check every closed-form distance against the general projector.
    pub check_general: bool,
    pub n_pencils: usize,
    pub segments_per_pencil: usize,
    /// Angular perturbation of the initial VP in degrees.
    pub init_perturb_deg: f64,
}

impl Default for VpConfig {
    fn default() -> Self {
        VpConfig {
            seed: 0,
            n_samples: 10_000,
            sigma_px: 1.0,
            fov_deg: 70.0,
            image_size: 1000,
            length_px: [30.0, 300.0],
            check_general: true,
            n_pencils: 200,
            segments_per_pencil: 20,
            init_perturb_deg: 2.0,
        }
    }
}

impl VpConfig {
    fn focal(&self) -> f64 {
        0.5 * self.image_size as f64 / (0.5 * self.fov_deg).to_radians().tan()
    }

    fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) || self.image_size == 0 {
            return Err(HarnessError::InvalidConfig("bad camera model".into()));
        }
        if !(self.sigma_px >= 0.0) || !(self.length_px[0] > 0.0 && self.length_px[0] <= self.length_px[1]) {
            return Err(HarnessError::InvalidConfig("bad noise or segment length".into()));
        }
        Ok(())
    }
}

/// Noisy segment, in normalized coordinates, lying on a random line through `v`.
fn segment_through(rng: &mut ChaCha8Rng, cfg: &VpConfig, v: &Vector3<f64>) -> (Vector2<f64>, Vector2<f64>) {
    let f = cfg.focal();
    let h = 0.5 * cfg.image_size as f64 / f;
    loop {
        let p = Vector2::new(rng.random_range(-h..h), rng.random_range(-h..h));
        let l = Vector3::new(p.x, p.y, 1.0).cross(v);
        let n = l.xy().norm();
        if n < 1e-6 {
            continue;
        }
        let d = Vector2::new(l.y, -l.x) / n;
        let half = 0.5 * rng.random_range(cfg.length_px[0]..=cfg.length_px[1]) / f;
        let s = cfg.sigma_px / f;
        return (p - d * half + gauss2(rng) * s, p + d * half + gauss2(rng) * s);
    }
}

fn segment_sample(cfg: &VpConfig, index: usize) -> std::result::Result<Record, Failure> {
    let fail = |reason: String| Failure { sample: index, group: SEGMENTS.into(), reason };
    let mut rng = sample_rng(cfg.seed, Stream::Vp, index as u64);
    let v = random_unit(&mut rng);
    let (x1, x2) = segment_through(&mut rng, cfg, &v);
    let b = vp_bounds(&x1, &x2, &v).map_err(|e| fail(e.to_string()))?;
    let mut r = Record::new(index, SEGMENTS);
    r.set("sampson", b.sampson).set("geometric", b.geometric).set("ratio", b.ratio).set("b_upper", b.b_upper);
    r.set("rho", b.rho);
    if let Some(bl) = b.b_lower {
        r.set("b_lower", bl);
        let ok = bl <= b.ratio * (1.0 + SANDWICH_RTOL) && b.ratio <= b.b_upper * (1.0 + SANDWICH_RTOL);
        r.flag("sandwich_ok", ok);
    }
    if cfg.check_general {
        let sys = PolynomialConstraintSystem::single(vp_poly(&v));
        let z = [x1.x, x1.y, x2.x, x2.y];
        let g = project_general(&sys, &z, &Covariance::identity(4), &ProjectOptions::default())
            .map_err(|e| fail(e.to_string()))?;
        r.set("general", g.error).set("closed_vs_general", (g.error - b.geometric).abs());
    }
    Ok(r)
}

/// Sign-invariant angle between unit directions, in degrees.
fn axis_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b).abs()).to_degrees()
}

fn pencil_sample(cfg: &VpConfig, index: usize) -> std::result::Result<Record, Failure> {
    let fail = |reason: String| Failure { sample: index, group: REFINE.into(), reason };
    let mut rng = sample_rng(cfg.seed ^ 0x7065_6e63, Stream::Vp, index as u64);
    let v = random_unit(&mut rng);
    let segs: Vec<_> = (0..cfg.segments_per_pencil).map(|_| segment_through(&mut rng, cfg, &v)).collect();
    let kick = gauss3(&mut rng);
    let kick = (kick - v * v.dot(&kick)).normalize() * cfg.init_perturb_deg.to_radians().tan();
    let v0 = (v + kick).normalize();
    let opts = LmOptions::default();
    let s = refine_vp(&v0, &segs, VpLoss::Sampson, &opts).map_err(|e| fail(e.to_string()))?;
    let m = refine_vp(&v0, &segs, VpLoss::Midpoint, &opts).map_err(|e| fail(e.to_string()))?;
    let mut r = Record::new(index, REFINE);
    r.set("angle_init", axis_angle_deg(&v0, &v))
        .set("angle_sampson", axis_angle_deg(&s.params, &v))
        .set("angle_midpoint", axis_angle_deg(&m.params, &v))
        .set("angle_between", axis_angle_deg(&s.params, &m.params));
    Ok(r)
}

pub fn run(cfg: &VpConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new(NAME, cfg.seed, json!(cfg));
    report.metadata.insert("units".into(), "normalized image coordinates".into());
    let sw = Stopwatch::start();
    report.extend_outcomes(par_map(opts, cfg.n_samples, |i| segment_sample(cfg, i))?);
    if opts.timings {
        report.add_timing(SEGMENTS, sw.ms());
    }
    let sw = Stopwatch::start();
    report.extend_outcomes(par_map(opts, cfg.n_pencils, |i| pencil_sample(cfg, i))?);
    if opts.timings {
        report.add_timing(REFINE, sw.ms());
    }
    finish(report)
}

pub fn aggregate(records: &[Record]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    let agg = |g: &str, n: &str, v: f64| Aggregate { group: g.into(), name: n.into(), value: v };
    for (g, rs) in grouped(records) {
        if g == SEGMENTS {
            let ok = column(&rs, "sandwich_ok");
            out.push(agg(&g, "n_with_lambda", ok.len() as f64));
            out.push(agg(&g, "sandwich_violations", ok.iter().filter(|&&v| v == 0.0).count() as f64));
            let d = column(&rs, "closed_vs_general");
            if !d.is_empty() {
                out.push(agg(&g, "max_closed_vs_general", d.iter().cloned().fold(0.0, f64::max)));
            }
        } else if g == REFINE {
            for key in ["angle_init", "angle_sampson", "angle_midpoint", "angle_between"] {
                if let Some(m) = median(&column(&rs, key)) {
                    out.push(agg(&g, &format!("median_{key}"), m));
                }
            }
        }
        out.push(agg(&g, "n_records", rs.len() as f64));
    }
    Ok(out)
}
