use nalgebra::{DVector, Matrix3, Vector2, Vector3};

use super::{GeometricResult, OracleMethod};
use crate::error::{Error, Result};
use crate::roots::real_roots;

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += s * y;
    }
    out
}

/// Closest point on a line `(l1, l2, l3)` to the origin, in homogeneous form.
fn foot_from_origin(l: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-l.x * l.z, -l.y * l.z, l.x * l.x + l.y * l.y)
}

/// Globally optimal two-view correction under `x2^T F x1 = 0` via the degree-six polynomial.
///
/// Returns the 4-vector `(dx1, dx2)` moving both points onto a consistent pair.
pub fn triangulate_optimal_twoview(x1: &Vector2<f64>, x2: &Vector2<f64>, f: &Matrix3<f64>) -> Result<GeometricResult> {
    let sv = f.singular_values();
    let (s1, s2, s3) = {
        let mut s = [sv[0], sv[1], sv[2]];
        s.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        (s[0], s[1], s[2])
    };
    if !(s1 > 0.0) || s3 > 1e-8 * s1 || s2 <= 1e-8 * s1 {
        return Err(Error::RankDeficientF);
    }
    let f = f / s1;

    let t1 = Matrix3::new(1.0, 0.0, x1.x, 0.0, 1.0, x1.y, 0.0, 0.0, 1.0);
    let t2 = Matrix3::new(1.0, 0.0, x2.x, 0.0, 1.0, x2.y, 0.0, 0.0, 1.0);
    let ft = t2.transpose() * f * t1;

    let svd = ft.svd(true, true);
    let (imin, _) = svd.singular_values.argmin();
    let e1: Vector3<f64> = svd.v_t.expect("v_t").row(imin).transpose();
    let e2: Vector3<f64> = svd.u.expect("u").column(imin).into_owned();
    let n1 = (e1.x * e1.x + e1.y * e1.y).sqrt();
    let n2 = (e2.x * e2.x + e2.y * e2.y).sqrt();
    let en1 = e1.norm();
    let en2 = e2.norm();
    if n1 <= 1e-12 * en1 || n2 <= 1e-12 * en2 {
        return Err(Error::EpipoleAtPoint);
    }
    let e1 = e1 / n1;
    let e2 = e2 / n2;
    let r1 = Matrix3::new(e1.x, e1.y, 0.0, -e1.y, e1.x, 0.0, 0.0, 0.0, 1.0);
    let r2 = Matrix3::new(e2.x, e2.y, 0.0, -e2.y, e2.x, 0.0, 0.0, 0.0, 1.0);
    let fr = r2 * ft * r1.transpose();

    let (f1, f2) = (e1.z, e2.z);
    let (a, b, c, d) = (fr[(1, 1)], fr[(1, 2)], fr[(2, 1)], fr[(2, 2)]);

    // g(t) = t((at+b)^2 + f2^2 (ct+d)^2)^2 - (ad-bc)(1+f1^2 t^2)^2 (at+b)(ct+d)
    let atb = [b, a];
    let ctd = [d, c];
    let q = poly_add(&poly_mul(&atb, &atb), &poly_mul(&ctd, &ctd), f2 * f2);
    let term1 = poly_mul(&[0.0, 1.0], &poly_mul(&q, &q));
    let r = [1.0, 0.0, f1 * f1];
    let term2 = poly_mul(&poly_mul(&r, &r), &poly_mul(&atb, &ctd));
    let g = poly_add(&term1, &term2, -(a * d - b * c));

    let cost = |t: f64| {
        let ct = c * t + d;
        let at = a * t + b;
        t * t / (1.0 + f1 * f1 * t * t) + ct * ct / (at * at + f2 * f2 * ct * ct)
    };
    let mut best_t: Option<f64> = None;
    // The pencil parameter t = infinity is a candidate of its own.
    let denom = a * a + f2 * f2 * c * c;
    let mut best = if f1 != 0.0 && denom > 0.0 { 1.0 / (f1 * f1) + c * c / denom } else { f64::INFINITY };
    for t in real_roots(&g) {
        let s = cost(t);
        if s.is_finite() && s < best {
            best = s;
            best_t = Some(t);
        }
    }
    if !best.is_finite() {
        return Err(Error::NoConvergence("no finite stationary point of the pencil".into()));
    }
    let (l1, l2) = match best_t {
        Some(t) => (Vector3::new(t * f1, 1.0, -t), Vector3::new(-f2 * (c * t + d), a * t + b, c * t + d)),
        None => (Vector3::new(f1, 0.0, -1.0), Vector3::new(-f2 * c, a, c)),
    };
    let p1 = t1 * r1.transpose() * foot_from_origin(&l1);
    let p2 = t2 * r2.transpose() * foot_from_origin(&l2);
    let y1 = Vector2::new(p1.x / p1.z, p1.y / p1.z);
    let y2 = Vector2::new(p2.x / p2.z, p2.y / p2.z);
    let e = DVector::from_column_slice(&[y1.x - x1.x, y1.y - x1.y, y2.x - x2.x, y2.y - x2.y]);
    Ok(GeometricResult::new(e, OracleMethod::TwoviewPoly6))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::skew;

    #[test]
    fn linear_configuration() {
        let e = skew(&Vector3::new(1.0, 0.0, 0.0));
        let r = triangulate_optimal_twoview(&Vector2::new(0.0, 0.0), &Vector2::new(0.0, 0.1), &e).unwrap();
        assert!((r.error - 0.1 / 2f64.sqrt()).abs() < 1e-12);
        assert!((r.epsilon[1] - 0.05).abs() < 1e-12);
        assert!((r.epsilon[3] + 0.05).abs() < 1e-12);
    }

    #[test]
    fn consistent_pair() {
        let e = skew(&Vector3::new(1.0, 0.2, 0.1)) * crate::linalg::so3_exp(&Vector3::new(0.1, -0.2, 0.05));
        let x = Vector3::new(0.3, -0.2, 4.0);
        let r = crate::linalg::so3_exp(&Vector3::new(0.1, -0.2, 0.05));
        let p2 = r * x + Vector3::new(1.0, 0.2, 0.1);
        let x1 = Vector2::new(x.x / x.z, x.y / x.z);
        let x2 = Vector2::new(p2.x / p2.z, p2.y / p2.z);
        let g = triangulate_optimal_twoview(&x1, &x2, &e).unwrap();
        assert!(g.error < 1e-10);
    }

    #[test]
    fn rejects_full_rank() {
        assert_eq!(
            triangulate_optimal_twoview(&Vector2::zeros(), &Vector2::zeros(), &Matrix3::identity()).unwrap_err(),
            Error::RankDeficientF
        );
    }
}
