//! Tightness bounds relating the Sampson error to the geometric error.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{pinv, spectral_norm, symmetrize, RANK_RTOL};
use crate::poly::{MultiPoly, PolynomialConstraintSystem};

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_radius(h: &DMatrix<f64>) -> f64 {
    if h.nrows() == 0 {
        return 0.0;
    }
    symmetrize(h).symmetric_eigenvalues().iter().fold(0.0f64, |m, l| m.max(l.abs()))
}

/// Upper bound on the Sampson error of one quadratic constraint: `eG + rho / (2 |J|) eG^2`.
pub fn prop1_upper(eg: f64, rho: f64, j_norm: f64) -> Result<f64> {
    if !(j_norm > 0.0) {
        return Err(Error::ZeroJacobian);
    }
    Ok(eg + rho / (2.0 * j_norm) * eg * eg)
}

fn jhj(j: &DVector<f64>, h: &DMatrix<f64>) -> f64 {
    j.dot(&(h * j))
}

/// Region `J != 0` and `|J|^4 >= 2 |C| |J H J^T|` where the geometric error is at most twice the Sampson error.
pub fn prop2_region(c: f64, j: &DVector<f64>, h: &DMatrix<f64>) -> bool {
    let jn = j.norm();
    jn > 0.0 && jn.powi(4) >= 2.0 * c.abs() * jhj(j, h).abs()
}

/// Sufficient condition `|C| / |J| <= |J| / (2 rho)`, contained in [`prop2_region`].
pub fn relaxed_region(c: f64, j: &DVector<f64>, rho: f64) -> bool {
    let jn = j.norm();
    if !(jn > 0.0) {
        return false;
    }
    if rho == 0.0 {
        return true;
    }
    c.abs() / jn <= jn / (2.0 * rho)
}

/// Smallest-magnitude root `lambda` of `C + |J| lambda + (J H J^T / (2 |J|^2)) lambda^2 = 0`.
///
/// `z + lambda J^T / |J|` is then a point of the quadric, so `|lambda|` bounds the geometric error.
pub fn lambda_star(c: f64, j: &DVector<f64>, h: &DMatrix<f64>) -> Result<f64> {
    let jn = j.norm();
    if !(jn > 0.0) {
        return Err(Error::ZeroJacobian);
    }
    let q = jhj(j, h);
    let disc = jn.powi(4) - 2.0 * c * q;
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant);
    }
    // Cancellation-free form of (-|J|^3 + |J| sqrt(disc)) / (J H J^T); reduces to -c/|J| when q = 0.
    Ok(-2.0 * c * jn / (jn * jn + disc.sqrt()))
}

/// `tau = |lambda* / C| |J|`, so that `eG <= tau eS`; the limit 1 is returned when `C = 0`.
pub fn tau(c: f64, j_norm: f64, lambda: f64) -> f64 {
    if c == 0.0 {
        1.0
    } else {
        (lambda / c).abs() * j_norm
    }
}

/// Degree-`d` region of a single polynomial constraint at `z`.
///
/// Holds when `J != 0` and `|C| >= |sum_{i=2..d} (-2C/|J|)^i / i! * (u x T_i)|` with `u = J^T / |J|`,
/// i.e. `|C|` dominates the nonlinear Taylor terms evaluated at twice the Sampson step.
pub fn degree_d_region(p: &MultiPoly, z: &[f64]) -> Result<bool> {
    let c = p.eval(z)?;
    let j = p.gradient(z)?;
    let jn2 = j.norm_squared();
    if !(jn2 > 0.0) {
        return Ok(false);
    }
    let step: Vec<f64> = j.iter().map(|&v| -2.0 * c * v / jn2).collect();
    let shifted = p.shift(z)?;
    let mut nonlinear = 0.0;
    for i in 2..=shifted.degree() {
        nonlinear += shifted.homogeneous_part(i).eval(&step)?;
    }
    Ok(c.abs() >= nonlinear.abs())
}

/// Per-constraint coefficient norms of the degree-`j` Taylor parts at `z`.
fn taylor_coefficient_norms(sys: &PolynomialConstraintSystem, z: &[f64], j: usize) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(sys.n_constraints());
    for (i, c) in sys.constraints().iter().enumerate() {
        out[i] = c.shift(z)?.homogeneous_part(j).coefficient_norm();
    }
    Ok(out)
}

/// `eG + |J^+| sum_{j>=2} (mu_j / j!) |eG|_j^j`, an upper bound on the Sampson error for identity covariance.
///
/// `mu_j / j!` is taken as the Euclidean norm over constraints of the coefficient norms of the
/// degree-`j` parts of `C(z + eps)`; `|x|_j^j = sum_i |x_i|^j`.
pub fn general_lower_bound(sys: &PolynomialConstraintSystem, z: &[f64], eg: &DVector<f64>) -> Result<f64> {
    let j = sys.jacobian(z)?;
    let p = pinv(&j, RANK_RTOL);
    if p.rank < sys.n_constraints() {
        return Err(Error::RankDeficient);
    }
    let jp = spectral_norm(&p.matrix);
    let mut tail = 0.0;
    for d in 2..=sys.degree() {
        let mu = taylor_coefficient_norms(sys, z, d)?.norm();
        let pn: f64 = eg.iter().map(|x| x.abs().powi(d as i32)).sum();
        tail += mu * pn;
    }
    Ok(eg.norm() + jp * tail)
}

/// Certificate from the fixed-point inequality `kappa >= sum_j (|C_j| / |J| + sigma_j kappa)^2`.
#[derive(Clone, Debug)]
pub struct KappaCertificate {
    pub kappa: f64,
    /// `|J| |J^+|` with spectral norms.
    pub cond_j: f64,
    pub sigma_i: Vec<f64>,
    /// `cond(J) * kappa`.
    pub bound: f64,
    /// `cond(J) * sqrt(kappa)`; `sqrt(kappa)` bounds the multiplier norm in the fixed-point argument.
    pub sqrt_bound: f64,
}

/// Smallest nonnegative root of `kappa = sum_j (a_j + s_j kappa)^2`, if real.
pub fn kappa_root(a: &[f64], s: &[f64]) -> Option<f64> {
    let ss: f64 = s.iter().map(|x| x * x).sum();
    let as_: f64 = a.iter().zip(s).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let b = 1.0 - 2.0 * as_;
    let disc = b * b - 4.0 * ss * aa;
    if disc < 0.0 {
        return None;
    }
    let den = b + disc.sqrt();
    if den <= 0.0 {
        return if aa == 0.0 { Some(0.0) } else { None };
    }
    Some(2.0 * aa / den)
}

/// Certificate for `N` quadrics with full-row-rank Jacobian at `z`; `None` when the quadratic has no real root.
pub fn kappa_certificate(sys: &PolynomialConstraintSystem, z: &[f64]) -> Result<Option<KappaCertificate>> {
    let t = sys.taylor(z)?;
    let p = pinv(&t.jacobian, RANK_RTOL);
    if p.rank < sys.n_constraints() {
        return Err(Error::RankDeficient);
    }
    let jn = spectral_norm(&t.jacobian);
    let cond_j = jn * spectral_norm(&p.matrix);
    let sigma_i: Vec<f64> =
        t.hessians.iter().map(|h| spectral_radius(&(p.matrix.transpose() * h * &p.matrix * (jn / 2.0)))).collect();
    let a: Vec<f64> = t.value.iter().map(|c| c.abs() / jn).collect();
    Ok(kappa_root(&a, &sigma_i).map(|kappa| KappaCertificate {
        kappa,
        cond_j,
        bound: cond_j * kappa,
        sqrt_bound: cond_j * kappa.sqrt(),
        sigma_i,
    }))
}

/// Greedy choice of `target` constraints with a well-conditioned Jacobian at `z`.
///
/// Heuristic for systems that are not complete intersections; no guarantee attaches to the subset.
pub fn select_full_rank_subset(sys: &PolynomialConstraintSystem, z: &[f64], target: usize) -> Result<Vec<usize>> {
    let j = sys.jacobian(z)?;
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < target {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..sys.n_constraints() {
            if chosen.contains(&i) {
                continue;
            }
            let rows: Vec<usize> = chosen.iter().copied().chain(std::iter::once(i)).collect();
            let sub = j.select_rows(&rows);
            let sv = sub.singular_values();
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(_, s)| smin > s) {
                best = Some((i, smin));
            }
        }
        match best {
            Some((i, s)) if s > 0.0 => chosen.push(i),
            _ => return Err(Error::RankDeficient),
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Every bound and region flag for one data point.
#[derive(Clone, Debug, Default)]
pub struct BoundReport {
    pub rho: Option<f64>,
    pub prop1_rhs: Option<f64>,
    pub prop2_holds: bool,
    pub relaxed_holds: bool,
    pub lambda_star: Option<f64>,
    pub tau: Option<f64>,
    pub degree_d_holds: bool,
    pub kappa: Option<KappaCertificate>,
    pub cond_j: Option<f64>,
    pub sigma_i: Vec<f64>,
    pub general_lower_bound: Option<f64>,
    /// Rows chosen by [`select_full_rank_subset`] when the system has more constraints than its codimension.
    pub heuristic_subset: Option<Vec<usize>>,
}

impl BoundReport {
    /// Evaluates all applicable bounds; `eg` is the oracle's geometric correction when available.
    pub fn compute(sys: &PolynomialConstraintSystem, z: &[f64], eg: Option<&DVector<f64>>) -> Result<Self> {
        let t = sys.taylor(z)?;
        let mut r = BoundReport::default();
        if sys.n_constraints() == 1 {
            let c = t.value[0];
            let j = t.jacobian.row(0).transpose();
            let h = &t.hessians[0];
            let rho = spectral_radius(h);
            r.rho = Some(rho);
            r.prop2_holds = prop2_region(c, &j, h);
            r.relaxed_holds = relaxed_region(c, &j, rho);
            if let Ok(l) = lambda_star(c, &j, h) {
                r.lambda_star = Some(l);
                r.tau = Some(tau(c, j.norm(), l));
            }
            r.degree_d_holds = degree_d_region(&sys.constraints()[0], z)?;
            if let Some(e) = eg {
                r.prop1_rhs = prop1_upper(e.norm(), rho, j.norm()).ok();
            }
        }
        let p = pinv(&t.jacobian, RANK_RTOL);
        if p.rank == sys.n_constraints() {
            if sys.degree() <= 2 {
                r.kappa = kappa_certificate(sys, z)?;
                if let Some(k) = &r.kappa {
                    r.cond_j = Some(k.cond_j);
                    r.sigma_i = k.sigma_i.clone();
                }
            }
            if r.cond_j.is_none() {
                r.cond_j = Some(spectral_norm(&t.jacobian) * spectral_norm(&p.matrix));
            }
            if let Some(e) = eg {
                r.general_lower_bound = Some(general_lower_bound(sys, z, e)?);
            }
        } else if p.rank > 0 {
            r.heuristic_subset = select_full_rank_subset(sys, z, p.rank).ok();
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::examples::ellipse;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn h_ellipse() -> DMatrix<f64> {
        DMatrix::from_diagonal(&dv(&[2.0, 4.0]))
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&h_ellipse()), 4.0);
        assert_eq!(spectral_radius(&DMatrix::zeros(3, 3)), 0.0);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!((spectral_radius(&m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prop1_examples() {
        assert!((prop1_upper(1.0, 4.0, 6.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(prop1_upper(0.0, 4.0, 6.0).unwrap(), 0.0);
        assert_eq!(prop1_upper(0.7, 0.0, 6.0).unwrap(), 0.7);
        assert_eq!(prop1_upper(1.0, 1.0, 0.0).unwrap_err(), Error::ZeroJacobian);
    }

    #[test]
    fn regions_on_ellipse() {
        let h = h_ellipse();
        assert!(prop2_region(5.0, &dv(&[6.0, 0.0]), &h));
        assert!(prop2_region(14.0, &dv(&[0.0, 12.0]), &h));
        assert!(!prop2_region(-4.0, &dv(&[0.0, 0.0]), &h));
        // (3, 0): eS = 5/6 exceeds |J| / (2 rho) = 0.75, so only the wider region applies.
        assert!(!relaxed_region(5.0, &dv(&[6.0, 0.0]), 4.0));
        assert!(relaxed_region(14.0, &dv(&[0.0, 12.0]), 4.0));
        assert!(relaxed_region(100.0, &dv(&[1.0, 0.0]), 0.0));
    }

    #[test]
    fn lambda_examples() {
        let h = h_ellipse();
        assert!((lambda_star(5.0, &dv(&[6.0, 0.0]), &h).unwrap() + 1.0).abs() < 1e-15);
        let l = lambda_star(14.0, &dv(&[0.0, 12.0]), &h).unwrap();
        assert!((l + (3.0 - 2f64.sqrt())).abs() < 1e-14);
        let l = lambda_star(5.0, &dv(&[6.0, 0.0]), &DMatrix::zeros(2, 2)).unwrap();
        assert!((l + 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(lambda_star(1.0, &dv(&[1.0, 0.0]), &h).unwrap_err(), Error::NegativeDiscriminant);
    }

    #[test]
    fn degree_d_examples() {
        let e = ellipse();
        assert!(degree_d_region(&e, &[3.0, 0.0]).unwrap());
        assert!(degree_d_region(&e, &[2.0, 0.0]).unwrap());
        assert!(!degree_d_region(&e, &[0.0, 0.0]).unwrap());
        // x^3 - 1 at 1.2: C = 0.728, J = 4.32, 2 eS = -0.337; nonlinear part 3.6 s^2 + s^3 = 0.371.
        let cubic = MultiPoly::from_terms(1, [([3u16], 1.0), ([0], -1.0)]).unwrap();
        assert!(degree_d_region(&cubic, &[1.2]).unwrap());
    }

    #[test]
    fn kappa_ellipse() {
        let sys = PolynomialConstraintSystem::single(ellipse());
        let k = kappa_certificate(&sys, &[3.0, 0.0]).unwrap().unwrap();
        assert!((k.sigma_i[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((k.kappa - 1.0).abs() < 1e-14);
        assert!((k.cond_j - 1.0).abs() < 1e-15);
        assert!((k.bound - 1.0).abs() < 1e-14);
        let k = kappa_certificate(&sys, &[2.0, 0.0]).unwrap().unwrap();
        assert_eq!(k.kappa, 0.0);
        let k = kappa_certificate(&sys, &[0.0, 3.0]).unwrap().unwrap();
        assert!((k.kappa.sqrt() - (3.0 - 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn general_lower_bound_examples() {
        let sys = PolynomialConstraintSystem::single(ellipse());
        let b = general_lower_bound(&sys, &[3.0, 0.0], &dv(&[-1.0, 0.0])).unwrap();
        assert!((b - 1.5).abs() < 1e-15 && b >= 5.0 / 6.0);
        assert_eq!(general_lower_bound(&sys, &[2.0, 0.0], &dv(&[0.0, 0.0])).unwrap(), 0.0);
        let lin = PolynomialConstraintSystem::single(MultiPoly::from_terms(2, [([1u16, 0], 1.0), ([0, 0], -1.0)]).unwrap());
        assert_eq!(general_lower_bound(&lin, &[3.0, 0.0], &dv(&[-2.0, 0.0])).unwrap(), 2.0);
    }

    #[test]
    fn report_on_ellipse() {
        let sys = PolynomialConstraintSystem::single(ellipse());
        let r = BoundReport::compute(&sys, &[3.0, 0.0], Some(&dv(&[-1.0, 0.0]))).unwrap();
        assert_eq!(r.rho, Some(4.0));
        assert!(r.prop2_holds && !r.relaxed_holds && r.degree_d_holds);
        assert!((r.tau.unwrap() - 1.2).abs() < 1e-15);
        assert!((r.prop1_rhs.unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }
}
