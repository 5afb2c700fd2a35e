use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{pinv, RANK_RTOL};
use crate::sampson::Covariance;

/// Constraint values and measurement Jacobian at `(z, theta)` with their `theta`-derivatives.
///
/// `dc` is `N x P`; `djz[k]` is the `N x n` derivative of `jz` with respect to parameter `k`.
#[derive(Clone, Debug)]
pub struct ConstraintJet {
    pub c: DVector<f64>,
    pub jz: DMatrix<f64>,
    pub dc: DMatrix<f64>,
    pub djz: Vec<DMatrix<f64>>,
}

impl ConstraintJet {
    /// Jet with no parameter derivatives, for residual-only evaluation.
    pub fn value_only(c: DVector<f64>, jz: DMatrix<f64>) -> Self {
        let n = c.len();
        ConstraintJet { c, jz, dc: DMatrix::zeros(n, 0), djz: Vec::new() }
    }

    pub fn n_params(&self) -> usize {
        self.dc.ncols()
    }

    /// Multiplies every constraint by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        self.c *= s;
        self.jz *= s;
        self.dc *= s;
        for d in &mut self.djz {
            *d *= s;
        }
        self
    }
}

/// Whitened Sampson residual `r = (J_z Sigma^{1/2})^+ C` and, when requested, `dr / dtheta`.
#[derive(Clone, Debug)]
pub struct SampsonResidual {
    pub r: DVector<f64>,
    pub dr: Option<DMatrix<f64>>,
    pub rank: usize,
    /// `false` when `J_z` lost row rank and the fixed-rank pseudo-inverse path was used.
    pub full_rank: bool,
}

/// Residual and its exact derivative through the pseudo-inverse.
///
/// With `A = J_z Sigma^{1/2}`, `r = A^+ c` and `e = c - A r`, the derivative along one parameter is
/// `-A^+ dA r + A^+ A^+^T dA^T e + (I - A^+ A) dA^T A^+^T r + A^+ dc`.
pub fn sampson_residual_and_jacobian(jet: &ConstraintJet, sigma: Option<&Covariance>, with_jac: bool) -> Result<SampsonResidual> {
    let (nc, n) = jet.jz.shape();
    if jet.c.len() != nc {
        return Err(Error::DimensionMismatch { expected: nc, got: jet.c.len() });
    }
    if let Some(s) = sigma {
        if s.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s.dim() });
        }
    }
    let a = match sigma {
        Some(s) => &jet.jz * s.sqrt(),
        None => jet.jz.clone(),
    };
    let p = pinv(&a, RANK_RTOL);
    let ap = &p.matrix;
    let r = ap * &jet.c;
    let full_rank = p.rank == nc;
    if !with_jac {
        return Ok(SampsonResidual { r, dr: None, rank: p.rank, full_rank });
    }
    let np = jet.n_params();
    if jet.djz.len() != np {
        return Err(Error::DimensionMismatch { expected: np, got: jet.djz.len() });
    }
    let e = &jet.c - &a * &r;
    let apt_r = ap.transpose() * &r;
    let proj = DMatrix::identity(n, n) - ap * &a;
    let mut dr = ap * &jet.dc;
    for k in 0..np {
        let da = match sigma {
            Some(s) => &jet.djz[k] * s.sqrt(),
            None => jet.djz[k].clone(),
        };
        let dat = da.transpose();
        let col = -(ap * (&da * &r)) + ap * (ap.transpose() * (&dat * &e)) + &proj * (&dat * &apt_r);
        let mut target = dr.column_mut(k);
        target += col;
    }
    Ok(SampsonResidual { r, dr: Some(dr), rank: p.rank, full_rank })
}
