use nalgebra::{DVector, Matrix2, Vector2};

use super::{GeometricResult, OracleMethod};
use crate::error::{Error, Result};
use crate::poly::MultiPoly;
use crate::roots::real_roots;

type Poly = Vec<f64>;

fn pmul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn padd(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

fn pscale(a: &[f64], s: f64) -> Poly {
    a.iter().map(|x| x * s).collect()
}

/// Global closest point from `z` to the conic `{p = 0}`, where `p` has degree at most two in two variables.
///
/// Stationary points satisfy `(I + mu A) y = z - mu b / 2`; in the eigenbasis of `A` this yields a
/// polynomial of degree at most four in `mu`. Singular multipliers `mu = -1/d_k` contribute extra
/// candidates obtained by solving the conic along the free coordinate.
pub fn conic_distance(z: &Vector2<f64>, conic: &MultiPoly) -> Result<GeometricResult> {
    if conic.n_vars() != 2 || conic.degree() > 2 {
        return Err(Error::InvalidInput("conic must be a polynomial of degree <= 2 in two variables".into()));
    }
    let a = Matrix2::new(
        conic.coeff(&[2, 0]),
        0.5 * conic.coeff(&[1, 1]),
        0.5 * conic.coeff(&[1, 1]),
        conic.coeff(&[0, 2]),
    );
    let b = Vector2::new(conic.coeff(&[1, 0]), conic.coeff(&[0, 1]));
    let c0 = conic.coeff(&[0, 0]);
    let eval = |y: &Vector2<f64>| y.dot(&(a * y)) + b.dot(y) + c0;
    let scale = conic.coefficient_norm();

    let eig = a.symmetric_eigen();
    let q = eig.eigenvectors;
    let d = eig.eigenvalues;
    let w = q.transpose() * z;
    let bp = q.transpose() * b;

    let mut candidates: Vec<Vector2<f64>> = Vec::new();

    // Generic multipliers: clear denominators D_k = 1 + mu d_k.
    let num = |k: usize| vec![w[k], -0.5 * bp[k]];
    let den = |k: usize| vec![1.0, d[k]];
    let d0sq = pmul(&den(0), &den(0));
    let d1sq = pmul(&den(1), &den(1));
    let mut poly = pscale(&pmul(&d0sq, &d1sq), c0);
    poly = padd(&poly, &pscale(&pmul(&pmul(&num(0), &num(0)), &d1sq), d[0]));
    poly = padd(&poly, &pscale(&pmul(&pmul(&num(1), &num(1)), &d0sq), d[1]));
    poly = padd(&poly, &pscale(&pmul(&pmul(&num(0), &den(0)), &d1sq), bp[0]));
    poly = padd(&poly, &pscale(&pmul(&pmul(&num(1), &den(1)), &d0sq), bp[1]));
    for mu in real_roots(&poly) {
        let mut yp = Vector2::zeros();
        let mut ok = true;
        for k in 0..2 {
            let dk = 1.0 + mu * d[k];
            if dk.abs() < 1e-14 {
                ok = false;
                break;
            }
            yp[k] = (w[k] - 0.5 * mu * bp[k]) / dk;
        }
        if ok {
            candidates.push(q * yp);
        }
    }

    // Singular multipliers: coordinate k is free, the other follows from stationarity.
    for k in 0..2 {
        if d[k] == 0.0 {
            continue;
        }
        let mu = -1.0 / d[k];
        let l = 1 - k;
        let dl = 1.0 + mu * d[l];
        if dl.abs() < 1e-14 {
            continue;
        }
        let yl = (w[l] - 0.5 * mu * bp[l]) / dl;
        let rest = d[l] * yl * yl + bp[l] * yl + c0;
        for yk in real_roots(&[rest, bp[k], d[k]]) {
            let mut yp = Vector2::zeros();
            yp[k] = yk;
            yp[l] = yl;
            candidates.push(q * yp);
        }
    }

    // Polish each candidate with Newton steps on the Lagrange system and keep feasible ones.
    let grad = |y: &Vector2<f64>| 2.0 * a * y + b;
    let mut best: Option<Vector2<f64>> = None;
    for mut y in candidates {
        for _ in 0..3 {
            let g = grad(&y);
            let gn2 = g.norm_squared();
            if gn2 == 0.0 {
                break;
            }
            let cand = y - g * (eval(&y) / gn2);
            if eval(&cand).abs() <= eval(&y).abs() {
                y = cand;
            }
        }
        let tol = 1e-9 * (1.0 + scale) * (1.0 + y.norm_squared());
        if !(eval(&y).abs() <= tol) {
            continue;
        }
        if best.map_or(true, |bst| (y - z).norm() < (bst - z).norm()) {
            best = Some(y);
        }
    }
    let y = best.ok_or(Error::EmptyConic)?;
    let e = y - z;
    Ok(GeometricResult::new(DVector::from_column_slice(e.as_slice()), OracleMethod::ConicPoly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::examples::ellipse;

    #[test]
    fn ellipse_examples() {
        let e = ellipse();
        assert!((conic_distance(&Vector2::new(3.0, 0.0), &e).unwrap().error - 1.0).abs() < 1e-12);
        assert!(conic_distance(&Vector2::new(2.0, 0.0), &e).unwrap().error < 1e-15);
        let r = conic_distance(&Vector2::new(0.0, 0.0), &e).unwrap();
        assert!((r.error - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.epsilon[0].abs() < 1e-12);
        let r = conic_distance(&Vector2::new(0.0, 3.0), &e).unwrap();
        assert!((r.error - (3.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn empty_and_degenerate() {
        let empty = MultiPoly::from_terms(2, [([2u16, 0], 1.0), ([0, 2], 1.0), ([0, 0], 1.0)]).unwrap();
        assert_eq!(conic_distance(&Vector2::new(1.0, 1.0), &empty).unwrap_err(), Error::EmptyConic);
        let line = MultiPoly::from_terms(2, [([1u16, 0], 1.0), ([0, 1], 1.0), ([0, 0], -1.0)]).unwrap();
        let r = conic_distance(&Vector2::new(0.0, 0.0), &line).unwrap();
        assert!((r.error - 0.5f64.sqrt()).abs() < 1e-12);
        let parabola = MultiPoly::from_terms(2, [([2u16, 0], 1.0), ([0, 1], -1.0)]).unwrap();
        let r = conic_distance(&Vector2::new(0.0, 1.0), &parabola).unwrap();
        // Closest points (+-1/sqrt(2), 1/2).
        assert!((r.error - 0.75f64.sqrt()).abs() < 1e-12);
    }
}
