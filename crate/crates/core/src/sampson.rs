//! First-order (Sampson) approximations of the geometric error.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{pinv, spectral_norm, RANK_RTOL};

/// Default cap on the condition number of `J Sigma J^T` for [`sampson_multi`].
pub const NORMAL_COND_CAP: f64 = 1e12;
/// Relative tolerance of the range test `c in Im J`.
pub const FEASIBILITY_RTOL: f64 = 1e-8;

/// Symmetric positive-definite covariance with cached square root and inverses.
#[derive(Clone, Debug)]
pub struct Covariance {
    matrix: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv: DMatrix<f64>,
    sqrt_inv: DMatrix<f64>,
}

impl Covariance {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("covariance must be square".into()));
        }
        let scale = matrix.amax().max(1.0);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let eig = matrix.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let q = &eig.eigenvectors;
        let with = |f: &dyn Fn(f64) -> f64| {
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
            q * d * q.transpose()
        };
        Ok(Covariance { sqrt: with(&f64::sqrt), inv: with(&|l| 1.0 / l), sqrt_inv: with(&|l| 1.0 / l.sqrt()), matrix })
    }

    pub fn identity(n: usize) -> Self {
        let i = DMatrix::identity(n, n);
        Covariance { matrix: i.clone(), sqrt: i.clone(), inv: i.clone(), sqrt_inv: i }
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Block-diagonal covariance `diag(a, b)`.
    pub fn block_diag(a: &Covariance, b: &Covariance) -> Self {
        let bd = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
            let (n, m) = (x.nrows(), y.nrows());
            let mut out = DMatrix::zeros(n + m, n + m);
            out.view_mut((0, 0), (n, n)).copy_from(x);
            out.view_mut((n, n), (m, m)).copy_from(y);
            out
        };
        Covariance {
            matrix: bd(&a.matrix, &b.matrix),
            sqrt: bd(&a.sqrt, &b.sqrt),
            inv: bd(&a.inv, &b.inv),
            sqrt_inv: bd(&a.sqrt_inv, &b.sqrt_inv),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Symmetric square root.
    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    /// Symmetric inverse square root.
    pub fn sqrt_inverse(&self) -> &DMatrix<f64> {
        &self.sqrt_inv
    }
}

/// Which formula produced a [`SampsonResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampsonMethod {
    Single,
    Multi,
    General,
    Pseudo,
}

/// Minimum-norm solution of the linearized constraint.
#[derive(Clone, Debug)]
pub struct SampsonResult {
    pub epsilon: DVector<f64>,
    /// Mahalanobis norm of `epsilon`.
    pub error: f64,
    /// Whether `C + J epsilon = 0` holds after the correction.
    pub residual_feasible: bool,
    pub method: SampsonMethod,
}

fn linear_residual_ok(c: &DVector<f64>, j: &DMatrix<f64>, eps: &DVector<f64>) -> bool {
    (c + j * eps).norm() <= FEASIBILITY_RTOL * (1.0 + c.norm())
}

fn check_shapes(c: &DVector<f64>, j: &DMatrix<f64>, sigma: Option<&Covariance>) -> Result<()> {
    if j.nrows() != c.len() {
        return Err(Error::DimensionMismatch { expected: j.nrows(), got: c.len() });
    }
    if let Some(s) = sigma {
        if s.dim() != j.ncols() {
            return Err(Error::DimensionMismatch { expected: j.ncols(), got: s.dim() });
        }
    }
    Ok(())
}

/// Single constraint with identity covariance: `eps = -c J^T / |J|^2`.
pub fn sampson_single(c: f64, j_row: &[f64]) -> Result<SampsonResult> {
    let jn2: f64 = j_row.iter().map(|v| v * v).sum();
    let n = j_row.len();
    if jn2 == 0.0 {
        if c == 0.0 {
            return Ok(SampsonResult {
                epsilon: DVector::zeros(n),
                error: 0.0,
                residual_feasible: true,
                method: SampsonMethod::Single,
            });
        }
        return Err(Error::ZeroJacobian);
    }
    let epsilon = DVector::from_iterator(n, j_row.iter().map(|&v| -c * v / jn2));
    Ok(SampsonResult { epsilon, error: c.abs() / jn2.sqrt(), residual_feasible: true, method: SampsonMethod::Single })
}

/// Covariance-weighted multi-constraint Sampson: `eps = -Sigma J^T (J Sigma J^T)^{-1} c`.
pub fn sampson_multi(c: &DVector<f64>, j: &DMatrix<f64>, sigma: &Covariance) -> Result<SampsonResult> {
    sampson_multi_capped(c, j, sigma, NORMAL_COND_CAP)
}

/// [`sampson_multi`] with an explicit condition-number cap.
pub fn sampson_multi_capped(c: &DVector<f64>, j: &DMatrix<f64>, sigma: &Covariance, cap: f64) -> Result<SampsonResult> {
    check_shapes(c, j, Some(sigma))?;
    let sj = sigma.matrix() * j.transpose();
    let m = j * &sj;
    let eig = m.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(cond <= cap) {
        return Err(Error::SingularNormalMatrix { cond });
    }
    let chol = m.cholesky().ok_or(Error::SingularNormalMatrix { cond })?;
    let y = chol.solve(c);
    let epsilon = -(&sj * &y);
    let error = c.dot(&y).max(0.0).sqrt();
    let residual_feasible = linear_residual_ok(c, j, &epsilon);
    Ok(SampsonResult { epsilon, error, residual_feasible, method: SampsonMethod::Multi })
}

/// Pseudo-inverse solution `eps = -Sigma^{1/2} (J Sigma^{1/2})^+ c` without the range test.
///
/// When `c` is outside `Im J` this is the least-squares step; `residual_feasible` reports which case applies.
pub fn sampson_least_squares(c: &DVector<f64>, j: &DMatrix<f64>, sigma: &Covariance) -> Result<SampsonResult> {
    check_shapes(c, j, Some(sigma))?;
    let js = j * sigma.sqrt();
    let p = pinv(&js, RANK_RTOL);
    let u = &p.matrix * c;
    let range_gap = (&js * &u - c).norm();
    let epsilon = -(sigma.sqrt() * &u);
    Ok(SampsonResult {
        epsilon,
        error: u.norm(),
        residual_feasible: range_gap <= FEASIBILITY_RTOL * (1.0 + c.norm()),
        method: SampsonMethod::General,
    })
}

/// Rank-deficient Sampson via the pseudo-inverse; fails when `c` is not in `Im J`.
pub fn sampson_general(c: &DVector<f64>, j: &DMatrix<f64>, sigma: &Covariance) -> Result<SampsonResult> {
    let r = sampson_least_squares(c, j, sigma)?;
    if !r.residual_feasible {
        let js = j * sigma.sqrt();
        let residual = (&js * (-(sigma.sqrt_inverse() * &r.epsilon)) - c).norm();
        return Err(Error::InfeasibleLinearization { residual });
    }
    Ok(r)
}

/// Matrix norm used by [`pseudo_sampson`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PseudoNorm {
    #[default]
    Frobenius,
    Spectral,
}

impl FromStr for PseudoNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(PseudoNorm::Frobenius),
            "spectral" => Ok(PseudoNorm::Spectral),
            other => Err(Error::InvalidInput(format!("unknown pseudo norm `{other}`"))),
        }
    }
}

impl fmt::Display for PseudoNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PseudoNorm::Frobenius => "frobenius",
            PseudoNorm::Spectral => "spectral",
        })
    }
}

/// Naive extension of the scalar formula: `|c| / |J|`.
pub fn pseudo_sampson(c: &DVector<f64>, j: &DMatrix<f64>, norm: PseudoNorm) -> Result<f64> {
    check_shapes(c, j, None)?;
    let jn = match norm {
        PseudoNorm::Frobenius => j.norm(),
        PseudoNorm::Spectral => spectral_norm(j),
    };
    let cn = c.norm();
    if jn == 0.0 {
        return if cn == 0.0 { Ok(0.0) } else { Err(Error::ZeroJacobian) };
    }
    Ok(cn / jn)
}

/// `sqrt(v^T Sigma^{-1} v)`.
pub fn mahalanobis_norm(v: &DVector<f64>, sigma: &Covariance) -> f64 {
    (sigma.sqrt_inverse() * v).norm()
}
