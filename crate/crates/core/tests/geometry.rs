mod common;

use common::*;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use rand::Rng;
use sampson::geometry::*;
use sampson::linalg::rotation_angle;
use sampson::oracle::{project_general, ProjectOptions};
use sampson::sampson::{mahalanobis_norm, sampson_general, sampson_single, Covariance, PseudoNorm};

const FD_STEP: f64 = 1e-6;
const FD_RTOL: f64 = 1e-5;

/// Central differences of `f` at `z`.
fn numeric_jacobian(f: impl Fn(&[f64]) -> DVector<f64>, z: &[f64]) -> DMatrix<f64> {
    let m = f(z).len();
    let mut out = DMatrix::zeros(m, z.len());
    for k in 0..z.len() {
        let mut a = z.to_vec();
        let mut b = z.to_vec();
        a[k] += FD_STEP;
        b[k] -= FD_STEP;
        out.set_column(k, &((f(&a) - f(&b)) / (2.0 * FD_STEP)));
    }
    out
}

fn assert_fd(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) {
    let scale = numeric.amax().max(1e-8);
    let err = (analytic - numeric).amax() / scale;
    assert!(err <= FD_RTOL, "relative FD gap {err:e}\n{analytic}\n{numeric}");
}

fn v2(z: &[f64], i: usize) -> Vector2<f64> {
    Vector2::new(z[i], z[i + 1])
}

#[test]
fn essential_is_scale_invariant_and_consistent() {
    let mut r = rng(1);
    for _ in 0..100 {
        let pose = random_pose(&mut r, 0.5);
        let e = essential_from_pose(&pose).unwrap();
        let scaled = CameraPose::new(*pose.rotation(), pose.translation() * 3.7).unwrap();
        assert!((essential_from_pose(&scaled).unwrap().matrix() - e.matrix()).amax() < 1e-14);
        let s = e.matrix().svd(false, false).singular_values;
        let mut s: Vec<f64> = s.iter().cloned().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((s[0] - s[1]).abs() < 1e-8 && s[2] < 1e-12);
        let (_, xs) = visible_point(&mut r, &[CameraPose::identity(), pose]);
        let (c, _) = epipolar_constraint(&xs[0], &xs[1], e.matrix());
        assert!(c.abs() < 1e-12);
    }
}

#[test]
fn application_jacobians_match_finite_differences() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let pose = random_pose(&mut r, 0.5);
        let e = *essential_from_pose(&pose).unwrap().matrix();
        let z: Vec<f64> = (0..4).map(|_| r.random_range(-0.7..0.7)).collect();
        let (_, j) = epipolar_constraint(&v2(&z, 0), &v2(&z, 2), &e);
        let num = numeric_jacobian(|z| DVector::from_element(1, epipolar_constraint(&v2(z, 0), &v2(z, 2), &e).0), &z);
        assert_fd(&DMatrix::from_row_slice(1, 4, j.as_slice()), &num);

        let v = gauss3(&mut r).normalize();
        let jet = vp_constraint(&v2(&z, 0), &v2(&z, 2), &v).unwrap();
        let num =
            numeric_jacobian(|z| DVector::from_element(1, vp_constraint(&v2(z, 0), &v2(z, 2), &v).unwrap().c), &z);
        assert_fd(&DMatrix::from_row_slice(1, 4, jet.j.as_slice()), &num);

        let (x3, _) = visible_point(&mut r, &[pose]);
        let m = Match2D3D::new(v2(&z, 0), x3, Matrix2::identity(), Matrix3::identity()).unwrap();
        let zr = [z[0], z[1], x3.x, x3.y, x3.z];
        let f = |z: &[f64]| {
            let m = Match2D3D::new(v2(z, 0), Vector3::new(z[2], z[3], z[4]), Matrix2::identity(), Matrix3::identity())
                .unwrap();
            reproj_jet(&m, &pose).unwrap().value()
        };
        assert_fd(&reproj_jet(&m, &pose).unwrap().jacobian(), &numeric_jacobian(f, &zr));
    }
}

struct Triple {
    poses: [CameraPose; 3],
    t: TrifocalTensor,
    es: [Matrix3<f64>; 3],
    exact: [Vector2<f64>; 3],
    point: Vector3<f64>,
}

fn random_triple(r: &mut rand_chacha::ChaCha8Rng) -> Triple {
    let poses = [CameraPose::identity(), random_pose(r, 0.5), random_pose(r, 0.5)];
    let t = trifocal_from_cameras(&poses[0].matrix(), &poses[1].matrix(), &poses[2].matrix()).unwrap();
    let e12 = *essential_from_pose(&poses[1]).unwrap().matrix();
    let e13 = *essential_from_pose(&poses[2]).unwrap().matrix();
    let e23 = *essential_from_pose(&poses[1].relative_to(&poses[2])).unwrap().matrix();
    let (point, xs) = visible_point(r, &poses);
    Triple { poses, t, es: [e12, e13, e23], exact: [xs[0], xs[1], xs[2]], point }
}

fn noisy(r: &mut rand_chacha::ChaCha8Rng, xs: &[Vector2<f64>; 3], s: f64) -> [Vector2<f64>; 3] {
    [xs[0] + gauss2(r) * s, xs[1] + gauss2(r) * s, xs[2] + gauss2(r) * s]
}

#[test]
fn threeview_systems_vanish_and_differentiate() {
    let mut r = rng(3);
    let sel = MixSelection::default();
    for _ in 0..1000 {
        let tr = random_triple(&mut r);
        let sys = threeview_systems(&tr.exact, &tr.t, &tr.es[0], &tr.es[1], &tr.es[2], &sel).unwrap();
        for l in [&sys.c9, &sys.c4, &sys.c3, &sys.c43, &sys.c4132] {
            assert!(l.value.amax() < 1e-10);
        }
        let xs = noisy(&mut r, &tr.exact, 0.01);
        let z: Vec<f64> = xs.iter().flat_map(|x| [x.x, x.y]).collect();
        let at = |z: &[f64]| [v2(z, 0), v2(z, 2), v2(z, 4)];
        let sys = threeview_systems(&xs, &tr.t, &tr.es[0], &tr.es[1], &tr.es[2], &sel).unwrap();
        assert_fd(&sys.c9.jacobian, &numeric_jacobian(|z| c9_linearization(&at(z), &tr.t).value, &z));
        assert_fd(&sys.c4.jacobian, &numeric_jacobian(|z| c4_linearization(&at(z), &tr.t).value, &z));
        assert_fd(
            &sys.c3.jacobian,
            &numeric_jacobian(|z| c3_linearization(&at(z), &tr.es[0], &tr.es[1], &tr.es[2]).value, &z),
        );
    }
}

#[test]
fn trifocal_consistency_at_exact_projections() {
    let mut r = rng(4);
    for _ in 0..500 {
        let tr = random_triple(&mut r);
        assert!(c9_linearization(&tr.exact, &tr.t).value.amax() <= 1e-10);
    }
}

#[test]
fn c9_nullvectors_are_the_points() {
    let mut r = rng(5);
    for _ in 0..200 {
        let tr = random_triple(&mut r);
        let xs = noisy(&mut r, &tr.exact, 0.02);
        let c = c9_linearization(&xs, &tr.t).value;
        let m = Matrix3::from_row_slice(c.as_slice());
        let h1 = Vector3::new(xs[1].x, xs[1].y, 1.0);
        let h2 = Vector3::new(xs[2].x, xs[2].y, 1.0);
        assert!((h1.transpose() * m).amax() < 1e-10);
        assert!((m * h2).amax() < 1e-10);
    }
}

#[test]
fn c4_error_ignores_constant_basis_rotation() {
    let mut r = rng(6);
    for _ in 0..200 {
        let tr = random_triple(&mut r);
        let xs = noisy(&mut r, &tr.exact, 0.005);
        let base = c4_linearization(&xs, &tr.t);
        let e0 = sampson_general(&base.value, &base.jacobian, &Covariance::identity(6)).unwrap().error;
        // Two random orthonormal 2x2 transforms applied to S1 and S2: C4 -> Q1^T C4 Q2.
        let q = |a: f64, flip: bool| {
            let s = if flip { -1.0 } else { 1.0 };
            Matrix2::new(a.cos(), -s * a.sin(), a.sin(), s * a.cos())
        };
        let q1 = q(r.random_range(0.0..6.28), r.random_bool(0.5));
        let q2 = q(r.random_range(0.0..6.28), r.random_bool(0.5));
        let kron = DMatrix::from_fn(4, 4, |i, j| q1[(j / 2, i / 2)] * q2[(j % 2, i % 2)]);
        let e1 = sampson_general(&(&kron * &base.value), &(&kron * &base.jacobian), &Covariance::identity(6)).unwrap().error;
        assert!((e0 - e1).abs() <= 1e-9 * (1.0 + e0));
    }
}

#[test]
fn joint_c3_differs_from_pairwise() {
    let mut r = rng(7);
    for _ in 0..500 {
        let tr = random_triple(&mut r);
        let xs = noisy(&mut r, &tr.exact, 0.004);
        let sys = threeview_systems(&xs, &tr.t, &tr.es[0], &tr.es[1], &tr.es[2], &MixSelection::default()).unwrap();
        let e = ThreeViewErrors::compute(&sys, PseudoNorm::Frobenius).unwrap();
        assert!(e.pair != e.e3 && e.pair_sum != e.e3);
        let _ = tr.point;
        let _ = &tr.poses;
    }
}

#[test]
fn mix_selection_is_validated() {
    let bad = MixSelection { c43_rows: vec![0, 4], ..Default::default() };
    assert!(bad.validate().is_err());
    assert_eq!(MixSelection::default().to_string(), "c43=C4[0, 1, 2];c4132=C4[0]+C3[0, 1]");
}

#[test]
fn closed_form_epipolar_matches_generic_path() {
    let mut r = rng(8);
    for _ in 0..1000 {
        let e = *essential_from_pose(&random_pose(&mut r, 0.5)).unwrap().matrix();
        let z: Vec<f64> = (0..4).map(|_| r.random_range(-0.7..0.7)).collect();
        let closed = twoview_losses(&v2(&z, 0), &v2(&z, 2), &e).sampson;
        let p = epipolar_poly(&e);
        let generic = sampson_single(p.eval(&z).unwrap(), p.gradient(&z).unwrap().as_slice()).unwrap().error;
        assert!((closed - generic).abs() <= 1e-12 * (1.0 + closed));
    }
}

#[test]
fn symmetric_epipolar_dominates_sampson() {
    let mut r = rng(9);
    for _ in 0..10_000 {
        let e = *essential_from_pose(&random_pose(&mut r, 0.5)).unwrap().matrix();
        let z: Vec<f64> = (0..4).map(|_| r.random_range(-0.7..0.7)).collect();
        let l = twoview_losses(&v2(&z, 0), &v2(&z, 2), &e);
        assert!(l.sym_epipolar >= l.sampson * (1.0 - 1e-12));
    }
}

#[test]
fn consistent_pair_has_zero_losses() {
    let mut r = rng(10);
    let pose = random_pose(&mut r, 0.4);
    let e = *essential_from_pose(&pose).unwrap().matrix();
    let (_, xs) = visible_point(&mut r, &[CameraPose::identity(), pose]);
    let l = twoview_losses(&xs[0], &xs[1], &e);
    for v in [l.sampson, l.sym_epipolar, l.algebraic, l.cosine] {
        assert!(v < 1e-12);
    }
}

fn principal_gap(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let (a, b) = (a / a.norm(), b / b.norm());
    (a - b).norm().min((a + b).norm())
}

#[test]
fn dlt_recovers_noise_free_essential() {
    let mut r = rng(11);
    for _ in 0..50 {
        let pose = random_pose(&mut r, 0.5);
        let corrs: Vec<_> = (0..20)
            .map(|_| {
                let (_, xs) = visible_point(&mut r, &[CameraPose::identity(), pose]);
                (xs[0], xs[1])
            })
            .collect();
        let est = essential_dlt(&corrs).unwrap();
        let gt = essential_from_pose(&pose).unwrap();
        assert!(principal_gap(est.matrix(), gt.matrix()) <= 1e-6);
        let dec = decompose_essential(&est, &corrs).unwrap();
        assert!(rotation_angle(&(dec.rotation().transpose() * pose.rotation())) < 1e-6);
        assert!(dec.translation().normalize().dot(&pose.translation().normalize()) > 1.0 - 1e-9);
    }
}

#[test]
fn dlt_rejects_degenerate_design() {
    // Identical correspondences give a rank-one design matrix.
    let corrs = vec![(Vector2::new(0.1, 0.2), Vector2::new(-0.05, 0.3)); 12];
    assert!(essential_dlt(&corrs).is_err());
}

#[test]
fn dlt_residuals_under_pixel_noise() {
    let mut r = rng(12);
    let f = 500.0 / 35f64.to_radians().tan();
    let sigma = 1.0 / f;
    let pose = random_pose(&mut r, 0.5);
    let corrs: Vec<_> = (0..100)
        .map(|_| {
            let (_, xs) = visible_point(&mut r, &[CameraPose::identity(), pose]);
            (xs[0] + gauss2(&mut r) * sigma, xs[1] + gauss2(&mut r) * sigma)
        })
        .collect();
    let est = essential_dlt(&corrs).unwrap();
    let errs: Vec<f64> = corrs.iter().map(|(a, b)| twoview_losses(a, b, est.matrix()).sampson * f).collect();
    let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    assert!(rms <= 3.0, "rms Sampson residual {rms} px");
}

#[test]
fn reproj_small_3d_covariance_limit() {
    let mut r = rng(13);
    for _ in 0..200 {
        let pose = random_pose(&mut r, 0.5);
        let (x3, xs) = visible_point(&mut r, &[pose]);
        let x = xs[0] + gauss2(&mut r) * 0.01;
        let s2 = Matrix2::new(2e-4, 5e-5, 5e-5, 1e-4);
        let m = Match2D3D::new(x, x3, s2, Matrix3::identity() * 1e-8).unwrap();
        let es = reproj_constraint(&m, &pose).unwrap().error;
        // Linearized 2D-only reprojection residual.
        let p = pose.transform(&x3);
        let d = DVector::from_column_slice(&[p.x / p.z - x.x, p.y / p.z - x.y]);
        let em = mahalanobis_norm(&d, &Covariance::new(DMatrix::from_column_slice(2, 2, s2.as_slice())).unwrap());
        assert!((es - em).abs() <= 1e-3 * em, "{es} vs {em}");
    }
}

#[test]
fn reproj_sampson_tracks_nonlinear_projection() {
    let mut r = rng(14);
    let opts = ProjectOptions::default();
    for _ in 0..100 {
        let pose = random_pose(&mut r, 0.5);
        let (x3, xs) = visible_point(&mut r, &[pose]);
        let m = Match2D3D::new(
            xs[0] + gauss2(&mut r) * 0.005,
            x3 + gauss3(&mut r) * 0.02,
            Matrix2::identity() * 1e-5,
            Matrix3::identity() * 4e-4,
        )
        .unwrap();
        let es = reproj_constraint(&m, &pose).unwrap().error;
        let sys = reproj_system(&pose);
        let z = [m.x.x, m.x.y, m.point.x, m.point.y, m.point.z];
        let g = project_general(&sys, &z, m.covariance(), &opts).unwrap();
        // Sampson may sit slightly above the exact optimum; the gap is second order in the noise.
        assert!((es / g.error - 1.0).abs() <= 1e-2, "{es} vs {}", g.error);
        // The exact optimum is no worse than the feasible correction that moves only the 2D point.
        let p = pose.transform(&m.point);
        let e2 = DVector::from_column_slice(&[p.x / p.z - m.x.x, p.y / p.z - m.x.y, 0.0, 0.0, 0.0]);
        assert!(g.error <= mahalanobis_norm(&e2, m.covariance()) + 1e-8);
    }
}

#[test]
fn vp_bound_sandwich() {
    let mut r = rng(15);
    let mut checked = 0;
    for _ in 0..2000 {
        let v = gauss3(&mut r).normalize();
        let x1 = Vector2::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let x2 = Vector2::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let b = vp_bounds(&x1, &x2, &v).unwrap();
        if let Some(bl) = b.b_lower {
            assert!(bl <= b.ratio * (1.0 + 1e-9) && b.ratio <= b.b_upper * (1.0 + 1e-9));
            checked += 1;
        }
    }
    assert!(checked > 0);
}
