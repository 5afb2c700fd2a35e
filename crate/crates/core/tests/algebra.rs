//! Property tests for polynomials and the Sampson engine.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sampson::linalg::{null_space, pinv, RANK_RTOL};
use sampson::poly::{MultiPoly, PolynomialConstraintSystem};
use sampson::sampson::{
    mahalanobis_norm, pseudo_sampson, sampson_general, sampson_multi, sampson_single, Covariance, PseudoNorm,
};

/// Dense random polynomial in `n` variables up to degree `d`, from a flat coefficient pool.
fn poly_from(n: usize, d: usize, coeffs: &[f64]) -> MultiPoly {
    let mut exps: Vec<Vec<u16>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for e in &exps {
            let used: u16 = e.iter().sum();
            for k in 0..=(d as u16 - used) {
                let mut f = e.clone();
                f.push(k);
                next.push(f);
            }
        }
        exps = next;
    }
    let terms: Vec<(Vec<u16>, f64)> = exps.into_iter().zip(coeffs.iter().cycle()).map(|(e, &c)| (e, c)).collect();
    MultiPoly::from_terms(n, terms).unwrap()
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|k| k as f64).product()
}

/// `sum |c| (1 + |x|_inf)^deg` over the terms; a magnitude scale for evaluation round-off.
fn eval_scale(p: &MultiPoly, x: &[f64]) -> f64 {
    let m = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    p.terms().map(|(e, c)| c.abs() * m.powi(e.iter().map(|&k| k as i32).sum())).sum::<f64>().max(1.0)
}

fn random_cov(n: usize, raw: &[f64]) -> Covariance {
    let a = DMatrix::from_iterator(n, n, raw.iter().cycle().copied().take(n * n));
    Covariance::new(&a * a.transpose() + DMatrix::identity(n, n) * 0.5).unwrap()
}

fn coeff_pool(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn taylor_expansion_is_complete(
        n in 1usize..4, d in 1usize..5, pool in coeff_pool(40), pool2 in coeff_pool(40),
        z in coeff_pool(3), eps in coeff_pool(3),
    ) {
        let z = &z[..n];
        let eps: Vec<f64> = eps[..n].iter().map(|v| v / 2.0).collect();
        let sys = PolynomialConstraintSystem::new(vec![poly_from(n, d, &pool), poly_from(n, d, &pool2)]).unwrap();
        let mut series = sys.values(z).unwrap();
        for j in 1..=sys.degree() {
            series += sys.contract_tensor(z, j, &eps).unwrap() / factorial(j);
        }
        let shifted: Vec<f64> = z.iter().zip(&eps).map(|(a, b)| a + b).collect();
        let direct = sys.values(&shifted).unwrap();
        for (i, c) in sys.constraints().iter().enumerate() {
            let scale = eval_scale(c, &shifted).max(eval_scale(c, z));
            prop_assert!((series[i] - direct[i]).abs() <= 1e-10 * scale, "{} vs {}", series[i], direct[i]);
        }
    }

    #[test]
    fn derivatives_match_central_differences(
        n in 1usize..4, d in 2usize..4, pool in coeff_pool(30), z in coeff_pool(3),
    ) {
        let p = poly_from(n, d, &pool);
        let z = &z[..n];
        let h = 1e-5;
        let g = p.gradient(z).unwrap();
        let hs = p.hessian(z).unwrap();
        let mut g_num = DVector::zeros(n);
        let mut h_num = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[k] += h;
            zm[k] -= h;
            g_num[k] = (p.eval(&zp).unwrap() - p.eval(&zm).unwrap()) / (2.0 * h);
            h_num.set_column(k, &((p.gradient(&zp).unwrap() - p.gradient(&zm).unwrap()) / (2.0 * h)));
        }
        let s = eval_scale(&p, z);
        prop_assert!((&g - &g_num).amax() <= 1e-5 * s.max(g.amax()));
        prop_assert!((&hs - &h_num).amax() <= 1e-5 * s.max(hs.amax()));
    }

    #[test]
    fn text_form_round_trips(n in 1usize..4, d in 0usize..4, pool in prop::collection::vec(-1e6..1e6f64, 30)) {
        let p = poly_from(n, d, &pool);
        let back: MultiPoly = p.to_string().parse().unwrap();
        prop_assert_eq!(&back, &p);
        let sys = PolynomialConstraintSystem::new(vec![p.clone(), p.scale(0.5)]).unwrap();
        prop_assert_eq!(PolynomialConstraintSystem::parse(&sys.to_string()).unwrap(), sys);
    }

    #[test]
    fn coefficient_norm_bounds_homogeneous_parts(
        n in 1usize..4, d in 1usize..5, pool in coeff_pool(40), x in prop::collection::vec(-4.0..4.0f64, 3),
    ) {
        let q = poly_from(n, d, &pool).homogeneous_part(d);
        let x = &x[..n];
        let mu = q.coefficient_norm();
        let pn: f64 = x.iter().map(|v| v.abs().powi(d as i32)).sum();
        let val = q.eval(x).unwrap();
        prop_assert!(val.abs() <= mu * pn * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn single_constraint_paths_agree(c in -10.0..10.0f64, j in prop::collection::vec(-5.0..5.0f64, 1..6)) {
        prop_assume!(j.iter().any(|v| v.abs() > 1e-3));
        let s = sampson_single(c, &j).unwrap();
        let n = j.len();
        let cv = DVector::from_element(1, c);
        let jm = DMatrix::from_row_slice(1, n, &j);
        let id = Covariance::identity(n);
        let m = sampson_multi(&cv, &jm, &id).unwrap();
        let g = sampson_general(&cv, &jm, &id).unwrap();
        let ps = pseudo_sampson(&cv, &jm, PseudoNorm::Frobenius).unwrap();
        let pt = pseudo_sampson(&cv, &jm, PseudoNorm::Spectral).unwrap();
        let tol = 1e-12 * (1.0 + s.error);
        prop_assert!((m.error - s.error).abs() <= tol);
        prop_assert!((g.error - s.error).abs() <= tol);
        prop_assert!((ps - s.error).abs() <= tol);
        prop_assert!((pt - s.error).abs() <= tol);
        prop_assert!((&m.epsilon - &s.epsilon).amax() <= tol);
    }

    #[test]
    fn sampson_is_the_minimum_norm_linearized_solution(
        rows in 1usize..4, extra in 1usize..4, jraw in coeff_pool(36), craw in coeff_pool(4),
        sraw in coeff_pool(36), praw in coeff_pool(6),
    ) {
        let n = rows + extra;
        let j = DMatrix::from_iterator(rows, n, jraw.iter().cycle().copied().take(rows * n));
        let c = DVector::from_iterator(rows, craw.iter().copied().take(rows));
        let sigma = random_cov(n, &sraw);
        let r = match sampson_multi(&c, &j, &sigma) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        prop_assert!(r.residual_feasible);
        prop_assert!((&c + &j * &r.epsilon).norm() <= 1e-8 * (1.0 + c.norm()));
        prop_assert!((mahalanobis_norm(&r.epsilon, &sigma) - r.error).abs() <= 1e-9 * (1.0 + r.error));
        let g = sampson_general(&c, &j, &sigma).unwrap();
        prop_assert!((g.error - r.error).abs() <= 1e-8 * (1.0 + r.error));
        // Any other feasible correction is no shorter.
        let ns = null_space(&j, RANK_RTOL);
        let w = DVector::from_iterator(ns.ncols(), praw.iter().copied().cycle().take(ns.ncols()));
        let other = &r.epsilon + &ns * w;
        prop_assert!(mahalanobis_norm(&other, &sigma) >= r.error - 1e-10);
    }

    #[test]
    fn general_matches_gauss_newton_step(
        rows in 1usize..4, extra in 0usize..3, jraw in coeff_pool(30), craw in coeff_pool(4),
    ) {
        let n = rows + extra;
        let j = DMatrix::from_iterator(rows, n, jraw.iter().cycle().copied().take(rows * n));
        let c = DVector::from_iterator(rows, craw.iter().copied().take(rows));
        let p = pinv(&j, RANK_RTOL);
        prop_assume!(p.rank == rows);
        let g = sampson_general(&c, &j, &Covariance::identity(n)).unwrap();
        let step = &p.matrix * &c;
        prop_assert!((g.error - step.norm()).abs() <= 1e-9 * (1.0 + step.norm()));
        if rows == n {
            let gn = (j.transpose() * &j).lu().solve(&(j.transpose() * &c)).unwrap();
            prop_assert!((g.error - gn.norm()).abs() <= 1e-7 * (1.0 + gn.norm()));
        }
    }

    #[test]
    fn sampson_is_invariant_to_constraint_scaling(
        rows in 1usize..4, jraw in coeff_pool(24), craw in coeff_pool(4), s in prop_oneof![-50.0..-0.1f64, 0.1..50.0f64],
    ) {
        let n = rows + 2;
        let j = DMatrix::from_iterator(rows, n, jraw.iter().cycle().copied().take(rows * n));
        let c = DVector::from_iterator(rows, craw.iter().copied().take(rows));
        let id = Covariance::identity(n);
        let (Ok(a), Ok(b)) = (sampson_general(&c, &j, &id), sampson_general(&(&c * s), &(&j * s), &id)) else {
            return Ok(());
        };
        prop_assert!((&a.epsilon - &b.epsilon).amax() <= 1e-9 * (1.0 + a.epsilon.amax()));
    }

    #[test]
    fn rank_deficient_general_is_feasible_or_rejected(jraw in coeff_pool(6), craw in coeff_pool(2), t in -2.0..2.0f64) {
        // Second row is a multiple of the first: c is in the range only when it shares that ratio.
        let row = DMatrix::from_row_slice(1, 3, &jraw[..3]);
        prop_assume!(row.norm() > 1e-3);
        let j = DMatrix::from_fn(2, 3, |i, k| if i == 0 { row[(0, k)] } else { t * row[(0, k)] });
        let consistent = DVector::from_vec(vec![craw[0], t * craw[0]]);
        let r = sampson_general(&consistent, &j, &Covariance::identity(3)).unwrap();
        prop_assert!((&consistent + &j * &r.epsilon).norm() <= 1e-8 * (1.0 + consistent.norm()));
        let bumped = DVector::from_vec(vec![craw[0], t * craw[0] + 1.0]);
        prop_assert!(sampson_general(&bumped, &j, &Covariance::identity(3)).is_err());
    }
}

#[test]
fn spectral_pseudo_never_exceeds_frobenius_denominator() {
    let c = DVector::from_vec(vec![3.0, 4.0]);
    let j = DMatrix::identity(2, 2);
    assert!((pseudo_sampson(&c, &j, PseudoNorm::Frobenius).unwrap() - 5.0 / 2f64.sqrt()).abs() < 1e-15);
    assert!((pseudo_sampson(&c, &j, PseudoNorm::Spectral).unwrap() - 5.0).abs() < 1e-15);
}
