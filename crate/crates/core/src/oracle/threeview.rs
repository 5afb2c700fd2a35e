use nalgebra::{DVector, Matrix3, Matrix3x4, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{GeometricResult, OracleMethod};
use crate::error::{Error, Result};

/// Settings for [`triangulate_threeview`].
#[derive(Clone, Debug)]
pub struct ThreeViewOptions {
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ThreeViewOptions {
    fn default() -> Self {
        ThreeViewOptions { max_iters: 100, restarts: 4, seed: 0x3ee }
    }
}

fn residual_and_jacobian(
    xs: &[Vector2<f64>; 3],
    cams: &[Matrix3x4<f64>; 3],
    x: &Vector3<f64>,
) -> Option<(nalgebra::SVector<f64, 6>, nalgebra::SMatrix<f64, 6, 3>)> {
    let mut r = nalgebra::SVector::<f64, 6>::zeros();
    let mut j = nalgebra::SMatrix::<f64, 6, 3>::zeros();
    for i in 0..3 {
        let m = cams[i].fixed_view::<3, 3>(0, 0);
        let p = m * x + cams[i].column(3);
        if p.z.abs() < 1e-300 {
            return None;
        }
        let iz = 1.0 / p.z;
        r[2 * i] = p.x * iz - xs[i].x;
        r[2 * i + 1] = p.y * iz - xs[i].y;
        for k in 0..3 {
            j[(2 * i, k)] = (m[(0, k)] - p.x * iz * m[(2, k)]) * iz;
            j[(2 * i + 1, k)] = (m[(1, k)] - p.y * iz * m[(2, k)]) * iz;
        }
    }
    Some((r, j))
}

fn camera_center(p: &Matrix3x4<f64>) -> Option<Vector3<f64>> {
    let m: Matrix3<f64> = p.fixed_view::<3, 3>(0, 0).into_owned();
    m.try_inverse().map(|mi| -(mi * p.column(3)))
}

/// Point minimizing the summed squared distances to the three back-projected rays.
fn midpoint(xs: &[Vector2<f64>; 3], cams: &[Matrix3x4<f64>; 3]) -> Option<Vector3<f64>> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for i in 0..3 {
        let m: Matrix3<f64> = cams[i].fixed_view::<3, 3>(0, 0).into_owned();
        let mi = m.try_inverse()?;
        let c = camera_center(&cams[i])?;
        let d = (mi * Vector3::new(xs[i].x, xs[i].y, 1.0)).normalize();
        let p = Matrix3::identity() - d * d.transpose();
        a += p;
        b += p * c;
    }
    a.try_inverse().map(|ai| ai * b)
}

fn lm(
    xs: &[Vector2<f64>; 3],
    cams: &[Matrix3x4<f64>; 3],
    mut x: Vector3<f64>,
    max_iters: usize,
) -> Option<(Vector3<f64>, f64, bool)> {
    let (mut r, mut j) = residual_and_jacobian(xs, cams, &x)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..max_iters {
        let jtj = j.transpose() * j;
        let g = j.transpose() * r;
        if g.amax() <= 1e-15 * (1.0 + jtj.amax()) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..20 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn = x + step;
            if let Some((rn, jn)) = residual_and_jacobian(xs, cams, &xn) {
                let cn = rn.norm_squared();
                if cn < cost {
                    let small = step.norm() <= 1e-14 * (1.0 + x.norm());
                    x = xn;
                    r = rn;
                    j = jn;
                    let rel = (cost - cn) / cost.max(1e-300);
                    cost = cn;
                    lambda = (lambda * 0.1).max(1e-12);
                    accepted = true;
                    if small || rel < 1e-15 {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Some((x, cost, converged))
}

/// Optimal three-view triangulation by Levenberg-Marquardt over the 3D point.
///
/// Starts at the midpoint estimate plus `restarts` random perturbations and keeps the best.
/// `epsilon` stacks the per-view corrections `pi(P_i X) - x_i`.
pub fn triangulate_threeview(
    xs: &[Vector2<f64>; 3],
    cams: &[Matrix3x4<f64>; 3],
    opts: &ThreeViewOptions,
) -> Result<GeometricResult> {
    let x0 = midpoint(xs, cams).ok_or_else(|| Error::NoConvergence("rays are parallel".into()))?;
    let c0 = camera_center(&cams[0]).ok_or(Error::DegenerateFrame)?;
    let spread = (x0 - c0).norm().max(1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![x0];
    for _ in 0..opts.restarts {
        let xi = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
        starts.push(x0 + xi * (0.1 * spread));
    }
    let mut best: Option<(Vector3<f64>, f64, bool)> = None;
    for s in starts {
        if let Some(res) = lm(xs, cams, s, opts.max_iters) {
            if best.as_ref().map_or(true, |b| res.1 < b.1) {
                best = Some(res);
            }
        }
    }
    let (x, _, converged) = best.ok_or_else(|| Error::NoConvergence("all starts failed".into()))?;
    let (r, j) = residual_and_jacobian(xs, cams, &x).ok_or_else(|| Error::NoConvergence("point at infinity".into()))?;
    let jtj = j.transpose() * j;
    let ev = jtj.symmetric_eigenvalues();
    let (lmin, lmax) = (ev.min(), ev.max());
    if !(lmin > 1e-14 * lmax) {
        return Err(Error::NoConvergence("point is not observable (rays coincide)".into()));
    }
    let behind = cams.iter().any(|p| (p.fixed_view::<3, 3>(0, 0) * x + p.column(3)).z <= 0.0);
    let mut g = GeometricResult::new(DVector::from_column_slice(r.as_slice()), OracleMethod::ThreeviewRefine);
    g.converged = converged;
    g.behind_camera = behind;
    Ok(g)
}
