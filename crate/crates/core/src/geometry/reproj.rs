use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Matrix2x5, Matrix3, Vector2, Vector3};

use super::pose::CameraPose;
use crate::error::{Error, Result};
use crate::poly::{MultiPoly, PolynomialConstraintSystem};
use crate::sampson::{sampson_multi, Covariance, SampsonResult};

/// 2D observation and 3D point with their covariances; the stacked 5x5 covariance is cached.
#[derive(Clone, Debug)]
pub struct Match2D3D {
    pub x: Vector2<f64>,
    pub point: Vector3<f64>,
    sigma2: Matrix2<f64>,
    sigma3: Matrix3<f64>,
    joint: Covariance,
}

impl Match2D3D {
    pub fn new(x: Vector2<f64>, point: Vector3<f64>, sigma2: Matrix2<f64>, sigma3: Matrix3<f64>) -> Result<Self> {
        let c2 = Covariance::new(DMatrix::from_column_slice(2, 2, sigma2.as_slice()))?;
        let c3 = Covariance::new(DMatrix::from_column_slice(3, 3, sigma3.as_slice()))?;
        Ok(Match2D3D { x, point, sigma2, sigma3, joint: Covariance::block_diag(&c2, &c3) })
    }

    pub fn sigma2(&self) -> &Matrix2<f64> {
        &self.sigma2
    }

    pub fn sigma3(&self) -> &Matrix3<f64> {
        &self.sigma3
    }

    /// `diag(Sigma_2, Sigma_3)` over the perturbation `(eps_2, eps_3)`.
    pub fn covariance(&self) -> &Covariance {
        &self.joint
    }
}

/// Residual `[I | -x](R X + t)`, its Jacobian over `(x, X)` and the camera-frame point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReprojJet {
    pub c: Vector2<f64>,
    pub j: Matrix2x5<f64>,
    pub p: Vector3<f64>,
}

impl ReprojJet {
    pub fn value(&self) -> DVector<f64> {
        DVector::from_column_slice(self.c.as_slice())
    }

    pub fn jacobian(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 5, self.j.as_slice())
    }
}

/// `dc/dx = -p_z I`, `dc/dX = [I | -x] R`.
pub fn reproj_jet(m: &Match2D3D, pose: &CameraPose) -> Result<ReprojJet> {
    let p = pose.transform(&m.point);
    if p.norm() <= 1e-12 * (1.0 + m.point.norm()) {
        return Err(Error::PointAtCamera);
    }
    let a = Matrix2x3::new(1.0, 0.0, -m.x.x, 0.0, 1.0, -m.x.y);
    let c = a * p;
    let dx = a * pose.rotation();
    let mut j = Matrix2x5::zeros();
    j[(0, 0)] = -p.z;
    j[(1, 1)] = -p.z;
    j.fixed_view_mut::<2, 3>(0, 2).copy_from(&dx);
    Ok(ReprojJet { c, j, p })
}

/// Covariance-weighted Sampson correction of one match.
pub fn reproj_constraint(m: &Match2D3D, pose: &CameraPose) -> Result<SampsonResult> {
    let jet = reproj_jet(m, pose)?;
    sampson_multi(&jet.value(), &jet.jacobian(), m.covariance())
}

/// Both reprojection equations as polynomials in `(x, y, X, Y, Z)`.
pub fn reproj_system(pose: &CameraPose) -> PolynomialConstraintSystem {
    let r = pose.rotation();
    let t = pose.translation();
    let var = |i| MultiPoly::var(5, i);
    let row = |k: usize| {
        let mut p = MultiPoly::constant(5, t[k]);
        for j in 0..3 {
            p = p + var(2 + j).scale(r[(k, j)]);
        }
        p
    };
    let depth = row(2);
    let eqs = (0..2).map(|k| row(k) - var(k) * depth.clone()).collect();
    PolynomialConstraintSystem::new(eqs).expect("two equations in five variables")
}
