//! Every error and bound for one measurement against a user-supplied polynomial system.

use sampson::bounds::BoundReport;
use sampson::oracle::{project_general, ProjectOptions};
use sampson::poly::PolynomialConstraintSystem;
use sampson::sampson::{pseudo_sampson, sampson_general, Covariance, PseudoNorm};
use serde_json::json;

use super::finish;
use crate::error::{HarnessError, Result};
use crate::report::{ExperimentReport, Record};

pub const NAME: &str = "point";

#[derive(Clone, Debug)]
pub struct PointConfig {
    pub system: PolynomialConstraintSystem,
    pub z: Vec<f64>,
    /// Per-coordinate variances; identity when absent.
    pub variances: Option<Vec<f64>>,
    pub pseudo_norm: PseudoNorm,
}

pub fn run(cfg: &PointConfig) -> Result<ExperimentReport> {
    let n = cfg.system.n_vars();
    if cfg.z.len() != n {
        return Err(HarnessError::InvalidConfig(format!("point has {} coordinates, system has {n} variables", cfg.z.len())));
    }
    let sigma = match &cfg.variances {
        Some(v) if v.len() != n => {
            return Err(HarnessError::InvalidConfig(format!("{} variances given for {n} variables", v.len())))
        }
        Some(v) => Covariance::diagonal(v)?,
        None => Covariance::identity(n),
    };
    let echo = json!({
        "system": cfg.system.to_string(),
        "z": cfg.z,
        "variances": cfg.variances,
        "pseudo_norm": cfg.pseudo_norm.to_string(),
    });
    let mut report = ExperimentReport::new(NAME, 0, echo);
    let z = cfg.z.as_slice();
    let t = cfg.system.taylor(z)?;
    let mut r = Record::new(0, "point");
    r.set("constraint_norm", t.value.norm());
    match sampson_general(&t.value, &t.jacobian, &sigma) {
        Ok(s) => {
            r.set("sampson", s.error).flag("sampson_feasible", s.residual_feasible);
        }
        Err(e) => {
            report.metadata.insert("sampson_error".into(), e.to_string());
        }
    }
    if let Ok(p) = pseudo_sampson(&t.value, &t.jacobian, cfg.pseudo_norm) {
        r.set("pseudo", p);
    }
    let g = project_general(&cfg.system, z, &sigma, &ProjectOptions::default());
    let eg = match &g {
        Ok(g) => {
            r.set("geometric", g.error).flag("geometric_converged", g.converged);
            Some(g.epsilon.clone())
        }
        Err(e) => {
            report.metadata.insert("geometric_error".into(), e.to_string());
            None
        }
    };
    let b = BoundReport::compute(&cfg.system, z, eg.as_ref())?;
    let opt = |r: &mut Record, k: &str, v: Option<f64>| {
        if let Some(v) = v {
            r.set(k, v);
        }
    };
    opt(&mut r, "rho", b.rho);
    opt(&mut r, "prop1_rhs", b.prop1_rhs);
    r.flag("prop2_holds", b.prop2_holds).flag("relaxed_holds", b.relaxed_holds).flag("degree_d_holds", b.degree_d_holds);
    opt(&mut r, "lambda_star", b.lambda_star);
    opt(&mut r, "tau", b.tau);
    opt(&mut r, "cond_j", b.cond_j);
    opt(&mut r, "general_lower_bound", b.general_lower_bound);
    if let Some(k) = &b.kappa {
        r.set("kappa", k.kappa).set("kappa_bound", k.bound).set("kappa_sqrt_bound", k.sqrt_bound);
    }
    for (i, s) in b.sigma_i.iter().enumerate() {
        r.set(&format!("sigma_{i}"), *s);
    }
    if let Some(sub) = &b.heuristic_subset {
        report.metadata.insert("heuristic_subset".into(), format!("{sub:?}"));
    }
    report.extend_outcomes([Ok(r)]);
    finish(report)
}
