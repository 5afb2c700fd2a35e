use nalgebra::{DMatrix, DVector, Matrix4, Vector2, Vector3, Vector4};

use crate::bounds::{lambda_star, prop1_upper, spectral_radius, tau};
use crate::error::{Error, Result};
use crate::oracle::vp_line_distance;
use crate::poly::MultiPoly;

/// Value, gradient and Hessian of the segment/vanishing-point constraint at `(x1, y1, x2, y2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VpJet {
    pub c: f64,
    pub j: Vector4<f64>,
    pub h: Matrix4<f64>,
}

impl VpJet {
    /// `|c| / |J|`.
    pub fn sampson_error(&self) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            self.c.abs() / self.j.norm()
        }
    }
}

fn hom(x: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(x.x, x.y, 1.0)
}

/// `c = v^T (x1_hat x x2_hat)` with `J = [(x2_hat x v)_12, (v x x1_hat)_12]`.
pub fn vp_constraint(x1: &Vector2<f64>, x2: &Vector2<f64>, v: &Vector3<f64>) -> Result<VpJet> {
    let h1 = hom(x1);
    let h2 = hom(x2);
    let g1 = h2.cross(v);
    let g2 = v.cross(&h1);
    let j = Vector4::new(g1.x, g1.y, g2.x, g2.y);
    if j.norm() == 0.0 {
        return Err(Error::ZeroJacobian);
    }
    let mut h = Matrix4::zeros();
    h[(0, 3)] = v.z;
    h[(1, 2)] = -v.z;
    h[(3, 0)] = v.z;
    h[(2, 1)] = -v.z;
    Ok(VpJet { c: v.dot(&h1.cross(&h2)), j, h })
}

/// The constraint as a polynomial in `(x1, y1, x2, y2)`.
pub fn vp_poly(v: &Vector3<f64>) -> MultiPoly {
    MultiPoly::from_terms(
        4,
        [
            ([0u16, 1, 0, 0], v.x),
            ([0, 0, 0, 1], -v.x),
            ([0, 0, 1, 0], v.y),
            ([1, 0, 0, 0], -v.y),
            ([1, 0, 0, 1], v.z),
            ([0, 1, 1, 0], -v.z),
        ],
    )
    .expect("four exponents")
}

/// Sampson and geometric errors of one segment with the interval `[B_l, B_u]` for their ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VpBounds {
    pub sampson: f64,
    pub geometric: f64,
    /// `eS / eG`, 1 when both vanish.
    pub ratio: f64,
    pub lambda_star: Option<f64>,
    /// `1 / tau`, present when `lambda*` exists.
    pub b_lower: Option<f64>,
    /// `1 + rho / (2 |J|) eG`.
    pub b_upper: f64,
    pub rho: f64,
}

/// Evaluates the Sampson error, the closed-form geometric error and both bounds; `v` must be unit.
pub fn vp_bounds(x1: &Vector2<f64>, x2: &Vector2<f64>, v: &Vector3<f64>) -> Result<VpBounds> {
    let jet = vp_constraint(x1, x2, v)?;
    let eg = vp_line_distance(x1, x2, v)?.error;
    let es = jet.sampson_error();
    let jd = DVector::from_column_slice(jet.j.as_slice());
    let hd = DMatrix::from_column_slice(4, 4, jet.h.as_slice());
    let rho = spectral_radius(&hd);
    let jn = jet.j.norm();
    let ls = lambda_star(jet.c, &jd, &hd).ok();
    Ok(VpBounds {
        sampson: es,
        geometric: eg,
        ratio: if eg == 0.0 && es == 0.0 { 1.0 } else { es / eg },
        lambda_star: ls,
        b_lower: ls.map(|l| 1.0 / tau(jet.c, jn, l)),
        b_upper: if eg > 0.0 { prop1_upper(eg, rho, jn)? / eg } else { 1.0 },
        rho,
    })
}
