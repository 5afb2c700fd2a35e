use nalgebra::{Matrix3, Matrix3x4, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{project_to_so3, rotation_angle, so3_exp};

/// Rigid transform `X -> R X + t` from world to camera coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    r: Matrix3<f64>,
    t: Vector3<f64>,
}

impl CameraPose {
    /// Validates that `r` is a rotation to 1e-10.
    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self> {
        if (r.transpose() * r - Matrix3::identity()).amax() > 1e-10 || (r.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput("rotation matrix is not orthonormal with det +1".into()));
        }
        Ok(CameraPose { r, t })
    }

    /// Builds a pose after projecting `r` to the nearest rotation.
    pub fn from_approx(r: &Matrix3<f64>, t: Vector3<f64>) -> Self {
        CameraPose { r: project_to_so3(r), t }
    }

    pub fn identity() -> Self {
        CameraPose { r: Matrix3::identity(), t: Vector3::zeros() }
    }

    /// Pose with rotation `exp([w]x)`.
    pub fn from_rotation_vector(w: &Vector3<f64>, t: Vector3<f64>) -> Self {
        CameraPose { r: so3_exp(w), t }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.t
    }

    /// Camera center `-R^T t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.r.transpose() * self.t)
    }

    pub fn transform(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.r * x + self.t
    }

    /// Normalized image coordinates of `x`; `None` when the depth is not positive.
    pub fn project(&self, x: &Vector3<f64>) -> Option<Vector2<f64>> {
        let p = self.transform(x);
        (p.z > 0.0).then(|| Vector2::new(p.x / p.z, p.y / p.z))
    }

    pub fn matrix(&self) -> Matrix3x4<f64> {
        let mut p = Matrix3x4::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.r);
        p.set_column(3, &self.t);
        p
    }

    /// Relative pose `other * self^{-1}` mapping this camera's frame to `other`'s.
    pub fn relative_to(&self, other: &CameraPose) -> CameraPose {
        let r = other.r * self.r.transpose();
        CameraPose { r, t: other.t - r * self.t }
    }

    /// Left-multiplicative update `R <- exp([w]x) R`, `t <- t + dt`.
    pub fn perturbed(&self, w: &Vector3<f64>, dt: &Vector3<f64>) -> CameraPose {
        CameraPose { r: so3_exp(w) * self.r, t: self.t + dt }
    }

    /// Angle of `R_a^T R_b` in radians.
    pub fn rotation_distance(&self, other: &CameraPose) -> f64 {
        rotation_angle(&(self.r.transpose() * other.r))
    }
}
