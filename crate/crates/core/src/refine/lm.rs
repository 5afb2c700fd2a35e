use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Per-block robust loss.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum RobustLoss {
    #[default]
    None,
    /// Quadratic below `delta`, linear above.
    Huber(f64),
}

impl RobustLoss {
    /// `rho(s)` for a squared block norm `s`, scaled so that `rho(s) = s` in the quadratic zone.
    fn rho(&self, s: f64) -> f64 {
        match *self {
            RobustLoss::None => s,
            RobustLoss::Huber(d) => {
                if s <= d * d {
                    s
                } else {
                    2.0 * d * s.sqrt() - d * d
                }
            }
        }
    }

    /// IRLS weight `rho'(s)`.
    fn weight(&self, s: f64) -> f64 {
        match *self {
            RobustLoss::None => 1.0,
            RobustLoss::Huber(d) => {
                if s <= d * d {
                    1.0
                } else {
                    d / s.sqrt()
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iters: usize,
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub robust: RobustLoss,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iters: 100,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 0.1,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            robust: RobustLoss::None,
        }
    }
}

impl LmOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.initial_damping, self.damping_up, self.damping_down, self.gradient_tol, self.step_tol];
        if pos.iter().any(|v| !(*v > 0.0)) || self.damping_up <= 1.0 || self.damping_down >= 1.0 {
            return Err(Error::InvalidInput("LM tolerances and damping factors must be positive".into()));
        }
        if let RobustLoss::Huber(d) = self.robust {
            if !(d > 0.0) {
                return Err(Error::InvalidInput("Huber threshold must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Residuals stacked block by block and, when requested, their Jacobian in local coordinates.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub residuals: DVector<f64>,
    pub jacobian: Option<DMatrix<f64>>,
}

/// A nonlinear least-squares problem over a manifold with a local retraction.
pub trait LeastSquaresProblem {
    type Param: Clone;

    fn n_params(&self) -> usize;

    /// Length of each residual block; robust weights are applied per block.
    fn block_len(&self) -> usize;

    fn evaluate(&self, p: &Self::Param, with_jac: bool) -> Result<Evaluation>;

    fn retract(&self, p: &Self::Param, delta: &DVector<f64>) -> Self::Param;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct LmSummary {
    /// Cost `1/2 sum rho(|r_b|^2)` at the start and after each accepted step.
    pub cost_trace: Vec<f64>,
    pub termination: Termination,
    pub iterations: usize,
    pub n_params: usize,
}

impl LmSummary {
    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().expect("initial cost is always recorded")
    }
}

#[derive(Clone, Debug)]
pub struct LmResult<P> {
    pub params: P,
    pub summary: LmSummary,
}

fn robust_cost(r: &DVector<f64>, block: usize, loss: RobustLoss) -> f64 {
    if block == 0 {
        return 0.0;
    }
    r.as_slice().chunks(block).map(|b| loss.rho(b.iter().map(|v| v * v).sum())).sum::<f64>() * 0.5
}

/// Weighted gradient and Gauss-Newton matrix.
fn normal_equations(ev: &Evaluation, block: usize, loss: RobustLoss) -> (DMatrix<f64>, DVector<f64>) {
    let j = ev.jacobian.as_ref().expect("jacobian requested");
    let mut r = ev.residuals.clone();
    let mut jw = j.clone();
    if loss != RobustLoss::None && block > 0 {
        for b in 0..r.len() / block {
            let s: f64 = r.rows(b * block, block).norm_squared();
            let w = loss.weight(s).sqrt();
            r.rows_mut(b * block, block).scale_mut(w);
            jw.rows_mut(b * block, block).scale_mut(w);
        }
    }
    (jw.transpose() * &jw, jw.transpose() * r)
}

/// Levenberg-Marquardt with Marquardt scaling `A + lambda diag(A)`.
///
/// Accepted costs never increase. A trial step with a non-finite cost counts as a rejection;
/// a non-finite residual at an accepted point aborts with [`Error::NonFiniteResidual`].
pub fn lm_minimize<P: LeastSquaresProblem>(problem: &P, p0: P::Param, opts: &LmOptions) -> Result<LmResult<P::Param>> {
    opts.validate()?;
    let block = problem.block_len();
    let mut p = p0;
    let mut ev = problem.evaluate(&p, true)?;
    if ev.residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResidual { iteration: 0 });
    }
    let mut cost = robust_cost(&ev.residuals, block, opts.robust);
    let mut trace = vec![cost];
    let mut lambda = opts.initial_damping;
    let n = problem.n_params();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    'outer: while iterations < opts.max_iters {
        let (a, g) = normal_equations(&ev, block, opts.robust);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResidual { iteration: iterations });
        }
        if g.amax() <= opts.gradient_tol {
            termination = Termination::Gradient;
            break;
        }
        iterations += 1;
        let dmax = a.diagonal().amax();
        let floor = (dmax * 1e-12).max(1e-300);
        loop {
            let mut m = a.clone();
            for i in 0..n {
                m[(i, i)] += lambda * a[(i, i)].max(floor);
            }
            let delta = match m.cholesky() {
                Some(ch) => -ch.solve(&g),
                None => {
                    lambda *= opts.damping_up;
                    if lambda > 1e32 {
                        termination = Termination::Step;
                        break 'outer;
                    }
                    continue;
                }
            };
            if delta.norm() <= opts.step_tol {
                termination = Termination::Step;
                break 'outer;
            }
            let cand = problem.retract(&p, &delta);
            let trial = problem.evaluate(&cand, false)?;
            let new_cost = robust_cost(&trial.residuals, block, opts.robust);
            if new_cost.is_finite() && new_cost < cost {
                p = cand;
                ev = problem.evaluate(&p, true)?;
                if ev.residuals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteResidual { iteration: iterations });
                }
                cost = new_cost;
                trace.push(cost);
                lambda = (lambda * opts.damping_down).max(1e-15);
                break;
            }
            lambda *= opts.damping_up;
            if lambda > 1e32 {
                termination = Termination::Step;
                break 'outer;
            }
        }
    }
    Ok(LmResult { params: p, summary: LmSummary { cost_trace: trace, termination, iterations, n_params: n } })
}

/// Euclidean problem defined by a closure returning residuals and Jacobian.
pub struct FnProblem<F> {
    pub n_params: usize,
    pub f: F,
}

impl<F> LeastSquaresProblem for FnProblem<F>
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    type Param = DVector<f64>;

    fn n_params(&self) -> usize {
        self.n_params
    }

    fn block_len(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &DVector<f64>, with_jac: bool) -> Result<Evaluation> {
        let (r, j) = (self.f)(p);
        Ok(Evaluation { residuals: r, jacobian: with_jac.then_some(j) })
    }

    fn retract(&self, p: &DVector<f64>, delta: &DVector<f64>) -> DVector<f64> {
        p + delta
    }
}
