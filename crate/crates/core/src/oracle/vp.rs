use nalgebra::{DVector, Matrix2, Matrix3, Vector2, Vector3};

use super::{GeometricResult, OracleMethod};
use crate::error::{Error, Result};
use crate::linalg::tangent_basis;
use crate::roots::real_roots;

/// Smallest joint endpoint correction placing segment `(x1, x2)` on a line through the homogeneous point `v`.
///
/// Lines through `v` form the pencil `l = U a` with `U` an orthonormal basis of `v`'s orthogonal complement.
/// The cost `sum_i (l^T x_i)^2 / (l1^2 + l2^2)` is a ratio of quadratic forms in `a`, minimized by a
/// 2x2 generalized eigenproblem.
pub fn vp_line_distance(x1: &Vector2<f64>, x2: &Vector2<f64>, v: &Vector3<f64>) -> Result<GeometricResult> {
    if (v.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("vanishing point must be a unit vector".into()));
    }
    let h1 = Vector3::new(x1.x, x1.y, 1.0);
    let h2 = Vector3::new(x2.x, x2.y, 1.0);
    let (b1, b2) = tangent_basis(v);
    let u = nalgebra::Matrix3x2::from_columns(&[b1, b2]);
    let a3: Matrix3<f64> = h1 * h1.transpose() + h2 * h2.transpose();
    let bm = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
    let a: Matrix2<f64> = u.transpose() * a3 * u;
    let b: Matrix2<f64> = u.transpose() * bm * u;

    // det(A - mu B) = 0
    let q2 = b.determinant();
    let q1 = -(a[(0, 0)] * b[(1, 1)] + a[(1, 1)] * b[(0, 0)] - a[(0, 1)] * b[(1, 0)] - a[(1, 0)] * b[(0, 1)]);
    let q0 = a.determinant();
    let mut dirs: Vec<Vector2<f64>> = vec![Vector2::x(), Vector2::y()];
    for mu in real_roots(&[q0, q1, q2]) {
        let m = a - b * mu;
        let r0 = Vector2::new(-m[(0, 1)], m[(0, 0)]);
        let r1 = Vector2::new(-m[(1, 1)], m[(1, 0)]);
        let d = if r0.norm() >= r1.norm() { r0 } else { r1 };
        if d.norm() > 0.0 {
            dirs.push(d.normalize());
        }
    }
    // Every candidate is a valid line of the pencil; the axis directions act as fallbacks.
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for d in dirs {
        let den = d.dot(&(b * d));
        if !(den > 1e-300) {
            continue;
        }
        let cost = d.dot(&(a * d)) / den;
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, u * d));
        }
    }
    let (_, l) = best.expect("the pencil always contains a finite line");
    let n2 = l.x * l.x + l.y * l.y;
    let corr = |h: &Vector3<f64>| {
        let s = l.dot(h) / n2;
        (-s * l.x, -s * l.y)
    };
    let (e1x, e1y) = corr(&h1);
    let (e2x, e2y) = corr(&h2);
    Ok(GeometricResult::new(DVector::from_column_slice(&[e1x, e1y, e2x, e2y]), OracleMethod::VpClosedForm))
}
