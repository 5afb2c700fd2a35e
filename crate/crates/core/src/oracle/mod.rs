//! Geometric-error oracles: exact closest points on constraint varieties.

mod conic;
mod threeview;
mod twoview;
mod vp;

pub use conic::conic_distance;
pub use threeview::{triangulate_threeview, ThreeViewOptions};
pub use twoview::triangulate_optimal_twoview;
pub use vp::vp_line_distance;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{null_space, pinv, RANK_RTOL};
use crate::poly::PolynomialConstraintSystem;
use crate::sampson::Covariance;

/// Which solver produced a [`GeometricResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMethod {
    ConicPoly,
    TwoviewPoly6,
    VpClosedForm,
    ThreeviewRefine,
    General,
}

/// Closest feasible correction `epsilon` and its Mahalanobis length.
#[derive(Clone, Debug)]
pub struct GeometricResult {
    pub epsilon: DVector<f64>,
    pub error: f64,
    pub converged: bool,
    pub method: OracleMethod,
    /// Set by the three-view oracle when the triangulated point fails cheirality.
    pub behind_camera: bool,
}

impl GeometricResult {
    pub(crate) fn new(epsilon: DVector<f64>, method: OracleMethod) -> Self {
        let error = epsilon.norm();
        GeometricResult { epsilon, error, converged: true, method, behind_camera: false }
    }
}

/// Settings for [`project_general`].
#[derive(Clone, Debug)]
pub struct ProjectOptions {
    pub max_iters: usize,
    pub n_random_starts: usize,
    pub seed: u64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions { max_iters: 100, n_random_starts: 8, seed: 0x5eed }
    }
}

/// Constraint evaluation in whitened coordinates `u = Sigma^{-1/2} eps`.
struct Whitened<'a> {
    sys: &'a PolynomialConstraintSystem,
    z: &'a [f64],
    l: &'a DMatrix<f64>,
    feas_tol: f64,
}

impl Whitened<'_> {
    fn point(&self, u: &DVector<f64>) -> Vec<f64> {
        let e = self.l * u;
        self.z.iter().zip(e.iter()).map(|(a, b)| a + b).collect()
    }

    fn g(&self, u: &DVector<f64>) -> DVector<f64> {
        self.sys.values(&self.point(u)).expect("dimension checked")
    }

    fn jac(&self, u: &DVector<f64>) -> DMatrix<f64> {
        self.sys.jacobian(&self.point(u)).expect("dimension checked") * self.l
    }

    /// Min-norm Gauss-Newton steps back onto the variety.
    fn restore(&self, u0: &DVector<f64>) -> Option<DVector<f64>> {
        let mut u = u0.clone();
        let mut g = self.g(&u);
        let mut gn = g.norm();
        for _ in 0..60 {
            if gn <= self.feas_tol {
                return Some(u);
            }
            let p = pinv(&self.jac(&u), RANK_RTOL);
            if p.rank == 0 {
                return None;
            }
            let step = -(&p.matrix * &g);
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand = &u + &step * t;
                let gc = self.g(&cand);
                let gcn = gc.norm();
                if gcn.is_finite() && gcn < gn {
                    u = cand;
                    g = gc;
                    gn = gcn;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (gn <= self.feas_tol * 1e3).then_some(u)
    }

    /// Damped Newton on the tangent space of the variety, minimizing `|u|^2 / 2`.
    fn local_solve(&self, u0: DVector<f64>, max_iters: usize) -> (DVector<f64>, bool) {
        let mut u = u0;
        let mut mu = 0.0f64;
        for _ in 0..max_iters {
            let j = self.jac(&u);
            let z = null_space(&j, RANK_RTOL);
            if z.ncols() == 0 {
                return (u, true);
            }
            let gr = z.transpose() * &u;
            let un = u.norm();
            if gr.norm() <= 1e-13 * (1.0 + un) {
                return (u, true);
            }
            // Multipliers from u + J^T alpha = 0 in the least-squares sense.
            let alpha = -(pinv(&j, RANK_RTOL).matrix.transpose() * &u);
            let hs = self.sys.eval_hessians(&self.point(&u)).expect("dimension checked");
            let mut w = DMatrix::identity(u.len(), u.len());
            for (a, h) in alpha.iter().zip(&hs) {
                w += self.l * h * self.l * *a;
            }
            let hr = z.transpose() * w * &z;
            let f0 = 0.5 * un * un;
            let k = hr.nrows();
            let mut accepted = false;
            for _ in 0..30 {
                let m = &hr + DMatrix::identity(k, k) * mu;
                let step = match m.cholesky() {
                    Some(ch) => ch.solve(&(-&gr)),
                    None => {
                        mu = (mu * 10.0).max(1e-8 * (1.0 + hr.amax()));
                        continue;
                    }
                };
                if let Some(cand) = self.restore(&(&u + &z * step)) {
                    let f1 = 0.5 * cand.norm_squared();
                    if f1 < f0 {
                        u = cand;
                        mu *= 0.1;
                        if mu < 1e-12 {
                            mu = 0.0;
                        }
                        accepted = true;
                        break;
                    }
                }
                mu = (mu * 10.0).max(1e-8 * (1.0 + hr.amax()));
            }
            if !accepted {
                // No descent is possible at working precision.
                return (u, gr.norm() <= 1e-7 * (1.0 + un));
            }
        }
        let j = self.jac(&u);
        let z = null_space(&j, RANK_RTOL);
        let ok = (z.transpose() * &u).norm() <= 1e-7 * (1.0 + u.norm());
        (u, ok)
    }

    /// Quadratic-penalty continuation from `u = 0`.
    fn penalty_start(&self) -> DVector<f64> {
        let n = self.l.ncols();
        let mut u = DVector::zeros(n);
        let j0 = self.jac(&u).norm().max(1e-12);
        let mut nu = 1.0 / (j0 * j0);
        for _ in 0..9 {
            for _ in 0..8 {
                let g = self.g(&u);
                let j = self.jac(&u);
                let lhs = DMatrix::identity(n, n) + j.transpose() * &j * nu;
                let rhs = -(&u + j.transpose() * &g * nu);
                match lhs.cholesky() {
                    Some(ch) => u += ch.solve(&rhs),
                    None => break,
                }
            }
            nu *= 10.0;
        }
        u
    }
}

/// Closest point on `{C = 0}` to `z` in the `Sigma`-Mahalanobis metric (local best of a multi-start).
pub fn project_general(
    sys: &PolynomialConstraintSystem,
    z: &[f64],
    sigma: &Covariance,
    opts: &ProjectOptions,
) -> Result<GeometricResult> {
    let n = sys.n_vars();
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    if sigma.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.dim() });
    }
    let g0 = sys.values(z)?;
    let scale = 1.0 + g0.norm() + sys.constraints().iter().map(|c| c.coefficient_norm()).fold(0.0, f64::max);
    let w = Whitened { sys, z, l: sigma.sqrt(), feas_tol: 1e-14 * scale };
    let finish = |u: DVector<f64>, converged: bool| {
        let epsilon = sigma.sqrt() * &u;
        GeometricResult { error: u.norm(), epsilon, converged, method: OracleMethod::General, behind_camera: false }
    };
    if g0.norm() <= w.feas_tol {
        return Ok(finish(DVector::zeros(n), true));
    }

    let j0 = w.jac(&DVector::zeros(n));
    let us = -(pinv(&j0, RANK_RTOL).matrix * &g0);
    let mut starts = vec![w.penalty_start(), us.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let r = us.norm().max(1e-6);
    for _ in 0..opts.n_random_starts {
        let xi = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        starts.push(&us + xi * (r / (n as f64).sqrt()));
    }

    let mut best: Option<(DVector<f64>, bool)> = None;
    for s in starts {
        let Some(u0) = w.restore(&s) else { continue };
        let (u, ok) = w.local_solve(u0, opts.max_iters);
        let better = match &best {
            None => true,
            Some((b, bok)) => (ok && !bok) || (ok == *bok && u.norm() < b.norm()),
        };
        if better {
            best = Some((u, ok));
        }
    }
    match best {
        Some((u, ok)) => Ok(finish(u, ok)),
        None => Err(Error::NoConvergence("no start reached the constraint set".into())),
    }
}
