//! Bound experiments: the ellipse region map and kappa certificates on the sphere-saddle curve.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use sampson::bounds::{degree_d_region, kappa_certificate, lambda_star, prop2_region, relaxed_region, spectral_radius, tau};
use sampson::oracle::{conic_distance, project_general, ProjectOptions};
use sampson::poly::examples::{ellipse, sphere_saddle};
use sampson::sampson::{sampson_single, Covariance};
use serde::Serialize;
use serde_json::json;

use super::{column, finish, grouped, par_map, RunOptions, Stopwatch};
use crate::error::{HarnessError, Result};
use crate::report::{Aggregate, ExperimentReport, Failure, Record};
use crate::scene::{gauss3, sample_rng, Stream};

pub const ELLIPSE_NAME: &str = "ellipse-map";
pub const KAPPA_NAME: &str = "kappa";

/// Slack on the ratio cap inside the prop2 region.
pub const RATIO_SLACK: f64 = 1e-9;

/// Absolute slack for the certificate checks; covers rounding in the sweep at zero distance.
pub const KAPPA_ABS_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllipseConfig {
    /// Grid points per axis over `[-extent, extent]`.
    pub grid: usize,
    pub extent: f64,
}

impl Default for EllipseConfig {
    fn default() -> Self {
        EllipseConfig { grid: 161, extent: 4.0 }
    }
}

fn ellipse_cell(cfg: &EllipseConfig, index: usize) -> std::result::Result<Record, Failure> {
    let fail = |reason: String| Failure { sample: index, group: "grid".into(), reason };
    let n = cfg.grid;
    let step = 2.0 * cfg.extent / (n - 1) as f64;
    let z = [-cfg.extent + (index % n) as f64 * step, -cfg.extent + (index / n) as f64 * step];
    let p = ellipse();
    let inner = || -> sampson::Result<Record> {
        let c = p.eval(&z)?;
        let j = p.gradient(&z)?;
        let h = p.hessian(&z)?;
        let rho = spectral_radius(&h);
        let g = conic_distance(&Vector2::new(z[0], z[1]), &p)?;
        let mut r = Record::new(index, "grid");
        r.set("x", z[0]).set("y", z[1]).set("c", c).set("eg", g.error);
        let prop2 = prop2_region(c, &j, &h);
        r.flag("prop2", prop2).flag("relaxed", relaxed_region(c, &j, rho));
        r.flag("degree_d", degree_d_region(&p, &z)?);
        if j.norm() > 0.0 {
            let es = sampson_single(c, j.as_slice())?.error;
            r.set("es", es);
            if es > 0.0 {
                r.set("ratio", g.error / es);
            }
            if let Ok(l) = lambda_star(c, &j, &h) {
                r.set("lambda_star", l).set("tau", tau(c, j.norm(), l));
            }
        }
        Ok(r)
    };
    inner().map_err(|e| fail(e.to_string()))
}

pub fn run_ellipse(cfg: &EllipseConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    if cfg.grid < 2 || !(cfg.extent > 0.0) {
        return Err(HarnessError::InvalidConfig("grid needs at least 2 points per axis and a positive extent".into()));
    }
    let mut report = ExperimentReport::new(ELLIPSE_NAME, 0, json!(cfg));
    report.metadata.insert("conic".into(), "x^2 + 2 y^2 - 4".into());
    let sw = Stopwatch::start();
    report.extend_outcomes(par_map(opts, cfg.grid * cfg.grid, |i| ellipse_cell(cfg, i))?);
    if opts.timings {
        report.add_timing("grid", sw.ms());
    }
    finish(report)
}

pub fn ellipse_aggregate(records: &[Record]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    let agg = |g: &str, n: &str, v: f64| Aggregate { group: g.into(), name: n.into(), value: v };
    for (g, rs) in grouped(records) {
        let n = rs.len() as f64;
        let on = |k: &str| rs.iter().filter(|r| r.get(k) == Some(1.0)).count();
        let in_prop2: Vec<f64> = rs.iter().filter(|r| r.get("prop2") == Some(1.0)).filter_map(|r| r.get("ratio")).collect();
        let max_ratio = in_prop2.iter().cloned().fold(0.0, f64::max);
        let violations = in_prop2.iter().filter(|&&q| q > 2.0 + RATIO_SLACK).count();
        let relaxed_outside = rs.iter().filter(|r| r.get("relaxed") == Some(1.0) && r.get("prop2") != Some(1.0)).count();
        out.push(agg(&g, "frac_prop2", on("prop2") as f64 / n));
        out.push(agg(&g, "frac_relaxed", on("relaxed") as f64 / n));
        out.push(agg(&g, "frac_degree_d", on("degree_d") as f64 / n));
        out.push(agg(&g, "max_ratio_prop2", max_ratio));
        out.push(agg(&g, "prop2_ratio_violations", violations as f64));
        out.push(agg(&g, "relaxed_outside_prop2", relaxed_outside as f64));
        let all_ratio = column(&rs, "ratio");
        out.push(agg(&g, "max_ratio", all_ratio.iter().cloned().fold(0.0, f64::max)));
        out.push(agg(&g, "n_records", n));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaConfig {
    pub seed: u64,
    pub noises: Vec<f64>,
    /// Sample sizes; the largest sets the number of points per noise level, and percentages are
    /// reported on the 200/500/1000-point prefixes that fit.
    pub sizes: Vec<usize>,
    /// Parameter samples for the dense sweep over the curve.
    pub sweep: usize,
    /// Also run the general projector and record its gap to the sweep.
    pub check_general: bool,
}

impl Default for KappaConfig {
    fn default() -> Self {
        KappaConfig { seed: 0, noises: vec![0.05, 0.1, 0.2], sizes: vec![200, 500, 1000], sweep: 4096, check_general: true }
    }
}

pub fn kappa_group(noise: f64) -> String {
    format!("sigma={noise}")
}

/// Point of the unit sphere intersected with `z = x y` above direction `theta` of the xy-plane.
pub fn saddle_curve(theta: f64) -> Vector3<f64> {
    let (s, c) = theta.sin_cos();
    let a = (c * s).powi(2);
    let u = if a < 1e-12 { 1.0 - a } else { (-1.0 + (1.0 + 4.0 * a).sqrt()) / (2.0 * a) };
    let r = u.sqrt();
    Vector3::new(r * c, r * s, u * c * s)
}

/// Distance from `z` to the curve: dense sweep, then golden-section refinement around the best samples.
pub fn saddle_distance(z: &Vector3<f64>, sweep: usize) -> f64 {
    let d2 = |t: f64| (saddle_curve(t) - z).norm_squared();
    let h = 2.0 * PI / sweep as f64;
    let vals: Vec<f64> = (0..sweep).map(|i| d2(i as f64 * h)).collect();
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = f64::INFINITY;
    // Refine every discrete local minimum of the closed curve.
    let minima = (0..sweep).filter(|&i| vals[i] <= vals[(i + sweep - 1) % sweep] && vals[i] <= vals[(i + 1) % sweep]);
    for i in minima {
        let (mut a, mut b) = ((i as f64 - 1.0) * h, (i as f64 + 1.0) * h);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (d2(x1), d2(x2));
        for _ in 0..80 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = d2(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = d2(x2);
            }
        }
        best = best.min(f1.min(f2)).min(vals[i]);
    }
    best.sqrt()
}

fn kappa_point(cfg: &KappaConfig, k: usize, index: usize) -> std::result::Result<Record, Failure> {
    let noise = cfg.noises[k];
    let group = kappa_group(noise);
    let fail = |reason: String| Failure { sample: index, group: group.clone(), reason };
    let mut rng = sample_rng(cfg.seed.wrapping_add(k as u64), Stream::Kappa, index as u64);
    let theta = rand::Rng::random_range(&mut rng, 0.0..2.0 * PI);
    let z = saddle_curve(theta) + gauss3(&mut rng) * noise;
    let sys = sphere_saddle();
    let mut r = Record::new(index, group.clone());
    let eg = saddle_distance(&z, cfg.sweep);
    r.set("eg", eg);
    let cert = kappa_certificate(&sys, z.as_slice()).map_err(|e| fail(e.to_string()))?;
    r.flag("certified", cert.is_some());
    if let Some(c) = cert {
        r.set("kappa", c.kappa).set("cond_j", c.cond_j).set("bound", c.bound).set("sqrt_bound", c.sqrt_bound);
        r.flag("holds_literal", eg <= c.bound + KAPPA_ABS_SLACK);
        r.flag("holds_sqrt", eg <= c.sqrt_bound + KAPPA_ABS_SLACK);
    }
    if cfg.check_general {
        let opts = ProjectOptions { n_random_starts: 16, ..ProjectOptions::default() };
        if let Ok(g) = project_general(&sys, z.as_slice(), &Covariance::identity(3), &opts) {
            r.set("eg_general", g.error).set("sweep_vs_general", g.error - eg);
        }
    }
    Ok(r)
}

pub fn run_kappa(cfg: &KappaConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    if cfg.noises.iter().any(|s| !(*s >= 0.0)) || cfg.sizes.is_empty() || cfg.sweep < 16 {
        return Err(HarnessError::InvalidConfig("kappa needs nonnegative noises, sizes and a sweep of >= 16".into()));
    }
    let n = *cfg.sizes.iter().max().expect("nonempty");
    let mut report = ExperimentReport::new(KAPPA_NAME, cfg.seed, json!(cfg));
    report.metadata.insert("system".into(), "x^2 + y^2 + z^2 - 1, z - x y".into());
    report.metadata.insert("sizes".into(), cfg.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
    for k in 0..cfg.noises.len() {
        let sw = Stopwatch::start();
        report.extend_outcomes(par_map(opts, n, |i| kappa_point(cfg, k, i))?);
        if opts.timings {
            report.add_timing(&kappa_group(cfg.noises[k]), sw.ms());
        }
    }
    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    report.config["sizes"] = json!(sizes);
    finish(report)
}

fn pct(rs: &[&Record], key: &str) -> Option<f64> {
    let v = column(rs, key);
    (!v.is_empty()).then(|| 100.0 * v.iter().sum::<f64>() / v.len() as f64)
}

/// Percentages per noise level, for each prefix size recorded in the data and for the whole group.
pub fn kappa_aggregate(records: &[Record]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    for (g, rs) in grouped(records) {
        let mut push = |suffix: String, sub: &[&Record]| {
            let mut add = |name: &str, v: Option<f64>| {
                if let Some(v) = v {
                    out.push(Aggregate { group: g.clone(), name: format!("{name}{suffix}"), value: v });
                }
            };
            add("pct_certified", pct(sub, "certified"));
            add("pct_holds_literal", pct(sub, "holds_literal"));
            add("pct_holds_sqrt", pct(sub, "holds_sqrt"));
        };
        for n in [200usize, 500, 1000] {
            let sub: Vec<&Record> = rs.iter().copied().filter(|r| r.sample < n).collect();
            if sub.len() == n {
                push(format!("@n={n}"), &sub);
            }
        }
        push(String::new(), &rs);
        let count = |k: &str| rs.iter().filter(|r| r.get(k) == Some(0.0)).count() as f64;
        out.push(Aggregate { group: g.clone(), name: "literal_violations".into(), value: count("holds_literal") });
        out.push(Aggregate { group: g.clone(), name: "sqrt_violations".into(), value: count("holds_sqrt") });
        let gap = column(&rs, "sweep_vs_general");
        if !gap.is_empty() {
            // Negative gaps would mean the local projector found a closer point than the sweep.
            out.push(Aggregate { group: g.clone(), name: "min_general_minus_sweep".into(), value: gap.iter().cloned().fold(f64::INFINITY, f64::min) });
        }
        out.push(Aggregate { group: g.clone(), name: "n_records".into(), value: rs.len() as f64 });
    }
    Ok(out)
}
