//! Oracle cross-checks and bound properties on random instances.

mod common;

use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3};
use proptest::prelude::*;
use sampson::bounds::{
    kappa_certificate, lambda_star, prop1_upper, prop2_region, relaxed_region, spectral_radius, tau, BoundReport,
};
use sampson::geometry::{epipolar_poly, essential_from_pose, vp_poly, CameraPose};
use sampson::oracle::{
    conic_distance, project_general, triangulate_optimal_twoview, triangulate_threeview, vp_line_distance,
    ProjectOptions, ThreeViewOptions,
};
use sampson::poly::{examples::ellipse, MultiPoly, PolynomialConstraintSystem};
use sampson::sampson::Covariance;

fn conic(k: &[f64]) -> MultiPoly {
    MultiPoly::from_terms(
        2,
        [([2u16, 0], k[0]), ([1, 1], k[1]), ([0, 2], k[2]), ([1, 0], k[3]), ([0, 1], k[4]), ([0, 0], k[5])],
    )
    .unwrap()
}

/// Value, gradient and Hessian of a single constraint at `z`.
fn jet(p: &MultiPoly, z: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    (p.eval(z).unwrap(), p.gradient(z).unwrap(), p.hessian(z).unwrap())
}

/// Embeds a polynomial in `(x_a, y_a, x_b, y_b)` into six variables.
fn embed(p: &MultiPoly, a: usize, b: usize) -> MultiPoly {
    let terms: Vec<(Vec<u16>, f64)> = p
        .terms()
        .map(|(e, c)| {
            let mut f = vec![0u16; 6];
            f[2 * a] = e[0];
            f[2 * a + 1] = e[1];
            f[2 * b] = e[2];
            f[2 * b + 1] = e[3];
            (f, c)
        })
        .collect();
    MultiPoly::from_terms(6, terms).unwrap()
}

fn unit(v: &[f64]) -> Option<Vector3<f64>> {
    let v = Vector3::new(v[0], v[1], v[2]);
    (v.norm() > 0.1).then(|| v.normalize())
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 6)
}

fn point2() -> impl Strategy<Value = Vector2<f64>> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y)| Vector2::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn conic_oracle_agrees_with_general_projector(k in coeffs(), z in point2()) {
        let p = conic(&k);
        let Ok(g) = conic_distance(&z, &p) else { return Ok(()) };
        let sys = PolynomialConstraintSystem::single(p);
        let r = project_general(&sys, z.as_slice(), &Covariance::identity(2), &ProjectOptions::default()).unwrap();
        prop_assert!((g.error - r.error).abs() <= 1e-8 * (1.0 + g.error), "conic {} general {}", g.error, r.error);
    }

    #[test]
    fn prop1_upper_bound_holds(k in coeffs(), z in point2()) {
        let p = conic(&k);
        let (c, j, h) = jet(&p, z.as_slice());
        prop_assume!(j.norm() > 1e-6);
        let Ok(g) = conic_distance(&z, &p) else { return Ok(()) };
        let es = c.abs() / j.norm();
        let rhs = prop1_upper(g.error, spectral_radius(&h), j.norm()).unwrap();
        prop_assert!(es <= rhs * (1.0 + 1e-9) + 1e-12, "eS {es} rhs {rhs}");
    }

    #[test]
    fn prop2_region_caps_the_ratio(k in coeffs(), z in point2()) {
        let p = conic(&k);
        let (c, j, h) = jet(&p, z.as_slice());
        prop_assume!(c.abs() > 1e-9 && prop2_region(c, &j, &h));
        let Ok(g) = conic_distance(&z, &p) else { return Ok(()) };
        let es = c.abs() / j.norm();
        prop_assert!(g.error / es <= 2.0 + 1e-9, "ratio {}", g.error / es);
    }

    #[test]
    fn relaxed_region_is_inside_prop2(k in coeffs(), z in point2()) {
        let p = conic(&k);
        let (c, j, h) = jet(&p, z.as_slice());
        if relaxed_region(c, &j, spectral_radius(&h)) {
            prop_assert!(prop2_region(c, &j, &h));
        }
    }

    #[test]
    fn inequality_chain_holds_when_lambda_exists(k in coeffs(), z in point2()) {
        let p = conic(&k);
        let (c, j, h) = jet(&p, z.as_slice());
        prop_assume!(j.norm() > 1e-6 && c.abs() > 1e-12);
        let Ok(l) = lambda_star(c, &j, &h) else { return Ok(()) };
        let Ok(g) = conic_distance(&z, &p) else { return Ok(()) };
        let es = c.abs() / j.norm();
        let t = tau(c, j.norm(), l);
        prop_assert!(t > 0.0 && t <= 2.0 + 1e-12, "tau {t}");
        let tol = 1e-9 * (1.0 + es);
        prop_assert!(0.5 * g.error <= g.error / t + tol);
        prop_assert!(g.error / t <= es + tol, "eG/tau {} eS {es}", g.error / t);
        // z + lambda J / |J| is on the conic.
        let zl: Vec<f64> = z.iter().zip(j.iter()).map(|(a, b)| a + l * b / j.norm()).collect();
        prop_assert!(p.eval(&zl).unwrap().abs() <= 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn oracle_beats_the_feasible_point_on_the_sampson_ray(k in coeffs(), z in point2()) {
        let p = conic(&k);
        let (c, j, h) = jet(&p, z.as_slice());
        prop_assume!(j.norm() > 1e-6);
        let Ok(g) = conic_distance(&z, &p) else { return Ok(()) };
        // p(z + s u) along u = J/|J| is the quadratic c + |J| s + (u^T H u / 2) s^2.
        let u = &j / j.norm();
        let a = 0.5 * u.dot(&(&h * &u));
        let roots: Vec<f64> = if a.abs() < 1e-14 {
            vec![-c / j.norm()]
        } else {
            let disc = j.norm_squared() - 4.0 * a * c;
            if disc < 0.0 { vec![] } else {
                vec![(-j.norm() + disc.sqrt()) / (2.0 * a), (-j.norm() - disc.sqrt()) / (2.0 * a)]
            }
        };
        for s in roots {
            prop_assert!(g.error <= s.abs() + 1e-9 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn kappa_length_bound_dominates_geometric_error(k in coeffs(), z in point2()) {
        let p = conic(&k);
        let sys = PolynomialConstraintSystem::single(p.clone());
        let (_, j, _) = jet(&p, z.as_slice());
        prop_assume!(j.norm() > 1e-6);
        let Ok(g) = conic_distance(&z, &p) else { return Ok(()) };
        if let Some(cert) = kappa_certificate(&sys, z.as_slice()).unwrap() {
            prop_assert!(g.error <= cert.sqrt_bound * (1.0 + 1e-9) + 1e-12, "eG {} bound {}", g.error, cert.sqrt_bound);
        }
    }

    #[test]
    fn ellipse_symmetries_preserve_distance(z in point2()) {
        let e = ellipse();
        let Ok(a) = conic_distance(&z, &e) else { return Ok(()) };
        for w in [Vector2::new(-z.x, z.y), Vector2::new(z.x, -z.y), -z] {
            let b = conic_distance(&w, &e).unwrap();
            prop_assert!((a.error - b.error).abs() <= 1e-10 * (1.0 + a.error));
        }
    }

    #[test]
    fn vp_closed_form_agrees_with_general_projector(
        v in prop::collection::vec(-1.0..1.0f64, 3), x1 in point2(), x2 in point2(),
    ) {
        let Some(v) = unit(&v) else { return Ok(()) };
        prop_assume!((x1 - x2).norm() > 0.05);
        let g = vp_line_distance(&x1, &x2, &v).unwrap();
        let sys = PolynomialConstraintSystem::single(vp_poly(&v));
        let z = [x1.x, x1.y, x2.x, x2.y];
        let r = project_general(&sys, &z, &Covariance::identity(4), &ProjectOptions::default()).unwrap();
        prop_assert!((g.error - r.error).abs() <= 1e-8 * (1.0 + g.error), "closed {} general {}", g.error, r.error);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn twoview_polynomial_oracle_agrees_with_general_projector(seed in any::<u64>(), noise in 0.0..0.05f64) {
        let mut r = common::rng(seed);
        let pose = common::random_pose(&mut r, 0.5);
        let e = essential_from_pose(&pose).unwrap().normalized();
        let (_, proj) = common::visible_point(&mut r, &[CameraPose::identity(), pose]);
        let x1 = proj[0] + common::gauss2(&mut r) * noise;
        let x2 = proj[1] + common::gauss2(&mut r) * noise;
        let Ok(g) = triangulate_optimal_twoview(&x1, &x2, e.matrix()) else { return Ok(()) };
        let sys = PolynomialConstraintSystem::single(epipolar_poly(e.matrix()));
        let z = [x1.x, x1.y, x2.x, x2.y];
        let q = project_general(&sys, &z, &Covariance::identity(4), &ProjectOptions::default()).unwrap();
        prop_assert!((g.error - q.error).abs() <= 1e-8 * (1.0 + g.error), "poly {} general {}", g.error, q.error);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn threeview_oracle_agrees_with_general_projector_on_pairwise_system(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let poses = [CameraPose::identity(), common::random_pose(&mut r, 0.5), common::random_pose(&mut r, 0.5)];
        let (_, proj) = common::visible_point(&mut r, &poses);
        let noise = 1.0 / 714.0;
        let xs = [0, 1, 2].map(|i| proj[i] + common::gauss2(&mut r) * noise);
        let cams = poses.map(|p| p.matrix());
        let g = triangulate_threeview(&xs, &cams, &ThreeViewOptions::default()).unwrap();
        let ess = |a: usize, b: usize| -> Matrix3<f64> {
            *essential_from_pose(&poses[a].relative_to(&poses[b])).unwrap().normalized().matrix()
        };
        let sys = PolynomialConstraintSystem::new(vec![
            embed(&epipolar_poly(&ess(0, 1)), 0, 1),
            embed(&epipolar_poly(&ess(0, 2)), 0, 2),
            embed(&epipolar_poly(&ess(1, 2)), 1, 2),
        ]).unwrap();
        let z: Vec<f64> = xs.iter().flat_map(|x| [x.x, x.y]).collect();
        let q = project_general(&sys, &z, &Covariance::identity(6), &ProjectOptions::default()).unwrap();
        prop_assert!((g.error - q.error).abs() <= 1e-6 * (1.0 + g.error), "three-view {} general {}", g.error, q.error);
    }
}

#[test]
fn kappa_length_bound_equals_lambda_on_ellipse_axes() {
    let e = ellipse();
    let sys = PolynomialConstraintSystem::single(e.clone());
    for z in [[3.0, 0.0], [2.5, 0.0], [-4.0, 0.0], [0.0, 3.0], [0.0, -2.0], [0.0, 1.6]] {
        let (c, j, h) = jet(&e, &z);
        let l = lambda_star(c, &j, &h).unwrap();
        let cert = kappa_certificate(&sys, &z).unwrap().unwrap();
        assert!((cert.sqrt_bound - l.abs()).abs() < 1e-12, "{z:?}: {} vs {}", cert.sqrt_bound, l);
    }
}

#[test]
fn literal_kappa_bound_is_not_a_length_bound() {
    // Just outside the ellipse the certificate's kappa is quadratic in the distance, so cond(J) kappa < eG.
    let e = ellipse();
    let z = [2.1, 0.0];
    let cert = kappa_certificate(&PolynomialConstraintSystem::single(e.clone()), &z).unwrap().unwrap();
    let g = conic_distance(&Vector2::new(z[0], z[1]), &e).unwrap();
    assert!((g.error - 0.1).abs() < 1e-12);
    assert!(cert.bound < g.error);
    assert!(cert.sqrt_bound >= g.error - 1e-12);
}

#[test]
fn bound_report_prefers_heuristic_subset_for_overdetermined_systems() {
    let s = sampson::poly::examples::sphere_saddle();
    let mut cs = s.constraints().to_vec();
    cs.push(cs[0].scale(2.0));
    let sys = PolynomialConstraintSystem::new(cs).unwrap();
    let r = BoundReport::compute(&sys, &[0.6, 0.5, 0.7], None).unwrap();
    assert!(r.kappa.is_none());
    let sub = r.heuristic_subset.unwrap();
    assert_eq!(sub.len(), 2);
    assert!(sub.contains(&1));
}
