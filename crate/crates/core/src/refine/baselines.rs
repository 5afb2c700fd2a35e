use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

use super::lm::{Evaluation, LeastSquaresProblem};
use super::models::{retract_pose, retract_unit, EssentialParam};
use crate::error::Result;
use crate::geometry::pose::CameraPose;
use crate::geometry::reproj::Match2D3D;
use crate::linalg::tangent_basis;

fn hom(x: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(x.x, x.y, 1.0)
}

/// Non-Sampson two-view losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineLoss {
    SymEpipolar,
    Algebraic,
    Cosine,
}

/// Two-view refinement problem for one of the [`BaselineLoss`] functions.
pub struct EpipolarBaseline {
    pub corrs: Vec<(Vector2<f64>, Vector2<f64>)>,
    pub loss: BaselineLoss,
}

/// `r = c / (s |P l|)` and its derivative, `P` keeping the first two entries when `planar`.
fn ratio(c: f64, dc: f64, l: &Vector3<f64>, dl: &Vector3<f64>, s: f64, planar: bool) -> (f64, f64) {
    let (l, dl) = if planar {
        (Vector3::new(l.x, l.y, 0.0), Vector3::new(dl.x, dl.y, 0.0))
    } else {
        (*l, *dl)
    };
    let g = s * l.norm();
    let dg = s * l.dot(&dl) / l.norm();
    (c / g, dc / g - c * dg / (g * g))
}

impl EpipolarBaseline {
    /// Residuals of one correspondence and their derivatives along `des`.
    fn block(&self, k: usize, e: &Matrix3<f64>, des: &[Matrix3<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (x1, x2) = &self.corrs[k];
        let h1 = hom(x1);
        let h2 = hom(x2);
        let l2 = e * h1;
        let l1 = e.transpose() * h2;
        let c = h2.dot(&l2);
        let n = self.block_len();
        let mut r = vec![0.0; n];
        let mut d = vec![vec![0.0; des.len()]; n];
        let mut fill = |dl1: Vector3<f64>, dl2: Vector3<f64>, dc: f64, q: Option<usize>| {
            let vals: Vec<(f64, f64)> = match self.loss {
                BaselineLoss::Algebraic => vec![(c, dc)],
                BaselineLoss::SymEpipolar => {
                    vec![ratio(c, dc, &l1, &dl1, 1.0, true), ratio(c, dc, &l2, &dl2, 1.0, true)]
                }
                BaselineLoss::Cosine => {
                    let s = std::f64::consts::SQRT_2;
                    vec![ratio(c, dc, &l2, &dl2, s * h2.norm(), false), ratio(c, dc, &l1, &dl1, s * h1.norm(), false)]
                }
            };
            for (i, (v, dv)) in vals.into_iter().enumerate() {
                match q {
                    None => r[i] = v,
                    Some(q) => d[i][q] = dv,
                }
            }
        };
        fill(Vector3::zeros(), Vector3::zeros(), 0.0, None);
        for (q, de) in des.iter().enumerate() {
            fill(de.transpose() * h2, de * h1, h2.dot(&(de * h1)), Some(q));
        }
        (r, d)
    }
}

impl LeastSquaresProblem for EpipolarBaseline {
    type Param = EssentialParam;

    fn n_params(&self) -> usize {
        5
    }

    fn block_len(&self) -> usize {
        match self.loss {
            BaselineLoss::Algebraic => 1,
            _ => 2,
        }
    }

    fn evaluate(&self, p: &EssentialParam, with_jac: bool) -> Result<Evaluation> {
        let e = p.essential();
        let des = if with_jac { p.essential_derivatives().to_vec() } else { Vec::new() };
        let b = self.block_len();
        let mut residuals = DVector::zeros(b * self.corrs.len());
        let mut jac = with_jac.then(|| DMatrix::zeros(b * self.corrs.len(), 5));
        for k in 0..self.corrs.len() {
            let (r, d) = self.block(k, &e, &des);
            for i in 0..b {
                residuals[k * b + i] = r[i];
                if let Some(j) = jac.as_mut() {
                    for q in 0..5 {
                        j[(k * b + i, q)] = d[i][q];
                    }
                }
            }
        }
        Ok(Evaluation { residuals, jacobian: jac })
    }

    fn retract(&self, p: &EssentialParam, delta: &DVector<f64>) -> EssentialParam {
        p.retract(delta)
    }
}

/// Midpoint baseline: the line through `v` and the segment midpoint, measured at both endpoints.
pub struct VpMidpoint {
    pub segments: Vec<(Vector2<f64>, Vector2<f64>)>,
}

impl LeastSquaresProblem for VpMidpoint {
    type Param = Vector3<f64>;

    fn n_params(&self) -> usize {
        2
    }

    fn block_len(&self) -> usize {
        2
    }

    fn evaluate(&self, v: &Vector3<f64>, with_jac: bool) -> Result<Evaluation> {
        let (b1, b2) = tangent_basis(v);
        let mut residuals = DVector::zeros(2 * self.segments.len());
        let mut jac = with_jac.then(|| DMatrix::zeros(2 * self.segments.len(), 2));
        for (k, (x1, x2)) in self.segments.iter().enumerate() {
            let (h1, h2) = (hom(x1), hom(x2));
            let m = (h1 + h2) * 0.5;
            let l = v.cross(&m);
            let dls = [b1.cross(&m), b2.cross(&m)];
            for (i, h) in [h1, h2].iter().enumerate() {
                let (r, _) = ratio(l.dot(h), 0.0, &l, &l, 1.0, true);
                residuals[2 * k + i] = r;
                if let Some(j) = jac.as_mut() {
                    for (q, dl) in dls.iter().enumerate() {
                        j[(2 * k + i, q)] = ratio(l.dot(h), dl.dot(h), &l, dl, 1.0, true).1;
                    }
                }
            }
        }
        Ok(Evaluation { residuals, jacobian: jac })
    }

    fn retract(&self, v: &Vector3<f64>, delta: &DVector<f64>) -> Vector3<f64> {
        retract_unit(v, delta)
    }
}

/// Whitened pinhole residual `W (pi(p) - x)` and `d/dp`.
fn projection_residual(p: &Vector3<f64>, x: &Vector2<f64>, w: &Matrix2<f64>) -> (Vector2<f64>, Matrix2x3<f64>) {
    let iz = 1.0 / p.z;
    let proj = Vector2::new(p.x * iz, p.y * iz);
    let dpi = Matrix2x3::new(iz, 0.0, -p.x * iz * iz, 0.0, iz, -p.y * iz * iz);
    (w * (proj - x), w * dpi)
}

/// `d p / d(w, dt)` for the left pose retraction at `p = R X + t`.
fn pose_columns(rx: &Vector3<f64>) -> [Vector3<f64>; 6] {
    [
        Vector3::x().cross(rx),
        Vector3::y().cross(rx),
        Vector3::z().cross(rx),
        Vector3::x(),
        Vector3::y(),
        Vector3::z(),
    ]
}

fn sqrt_inv2(s: &Matrix2<f64>) -> Matrix2<f64> {
    let e = s.symmetric_eigen();
    e.eigenvectors * Matrix2::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l.sqrt())) * e.eigenvectors.transpose()
}

fn sqrt_inv3(s: &Matrix3<f64>) -> Matrix3<f64> {
    let e = s.symmetric_eigen();
    e.eigenvectors * Matrix3::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l.sqrt())) * e.eigenvectors.transpose()
}

/// Pose-only reprojection error with the 2D covariance; 3D points are taken as exact.
pub struct ReprojectionOnly {
    pub matches: Vec<Match2D3D>,
    weights: Vec<Matrix2<f64>>,
}

impl ReprojectionOnly {
    pub fn new(matches: Vec<Match2D3D>) -> Self {
        let weights = matches.iter().map(|m| sqrt_inv2(m.sigma2())).collect();
        ReprojectionOnly { matches, weights }
    }
}

impl LeastSquaresProblem for ReprojectionOnly {
    type Param = CameraPose;

    fn n_params(&self) -> usize {
        6
    }

    fn block_len(&self) -> usize {
        2
    }

    fn evaluate(&self, pose: &CameraPose, with_jac: bool) -> Result<Evaluation> {
        let n = self.matches.len();
        let mut residuals = DVector::zeros(2 * n);
        let mut jac = with_jac.then(|| DMatrix::zeros(2 * n, 6));
        for (k, m) in self.matches.iter().enumerate() {
            let rx = pose.rotation() * m.point;
            let p = rx + pose.translation();
            let (r, dr) = projection_residual(&p, &m.x, &self.weights[k]);
            residuals.rows_mut(2 * k, 2).copy_from(&r);
            if let Some(j) = jac.as_mut() {
                for (q, dp) in pose_columns(&rx).iter().enumerate() {
                    j.view_mut((2 * k, q), (2, 1)).copy_from(&(dr * dp));
                }
            }
        }
        Ok(Evaluation { residuals, jacobian: jac })
    }

    fn retract(&self, p: &CameraPose, delta: &DVector<f64>) -> CameraPose {
        retract_pose(p, delta, 0)
    }
}

/// Pose and refined 3D points.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleParam {
    pub pose: CameraPose,
    pub points: Vec<Vector3<f64>>,
}

/// Joint optimization over the pose and every 3D point, with both covariances.
pub struct FullBundle {
    pub matches: Vec<Match2D3D>,
    w2: Vec<Matrix2<f64>>,
    w3: Vec<Matrix3<f64>>,
}

impl FullBundle {
    pub fn new(matches: Vec<Match2D3D>) -> Self {
        let w2 = matches.iter().map(|m| sqrt_inv2(m.sigma2())).collect();
        let w3 = matches.iter().map(|m| sqrt_inv3(m.sigma3())).collect();
        FullBundle { matches, w2, w3 }
    }
}

impl LeastSquaresProblem for FullBundle {
    type Param = BundleParam;

    fn n_params(&self) -> usize {
        6 + 3 * self.matches.len()
    }

    fn block_len(&self) -> usize {
        5
    }

    fn evaluate(&self, p: &BundleParam, with_jac: bool) -> Result<Evaluation> {
        let n = self.matches.len();
        let np = self.n_params();
        let mut residuals = DVector::zeros(5 * n);
        let mut jac = with_jac.then(|| DMatrix::zeros(5 * n, np));
        let r = p.pose.rotation();
        for (k, m) in self.matches.iter().enumerate() {
            let xk = p.points[k];
            let rx = r * xk;
            let cam = rx + p.pose.translation();
            let (res2, dr) = projection_residual(&cam, &m.x, &self.w2[k]);
            residuals.rows_mut(5 * k, 2).copy_from(&res2);
            residuals.rows_mut(5 * k + 2, 3).copy_from(&(self.w3[k] * (xk - m.point)));
            if let Some(j) = jac.as_mut() {
                for (q, dp) in pose_columns(&rx).iter().enumerate() {
                    j.view_mut((5 * k, q), (2, 1)).copy_from(&(dr * dp));
                }
                j.view_mut((5 * k, 6 + 3 * k), (2, 3)).copy_from(&(dr * r));
                j.view_mut((5 * k + 2, 6 + 3 * k), (3, 3)).copy_from(&self.w3[k]);
            }
        }
        Ok(Evaluation { residuals, jacobian: jac })
    }

    fn retract(&self, p: &BundleParam, delta: &DVector<f64>) -> BundleParam {
        let points = p
            .points
            .iter()
            .enumerate()
            .map(|(k, x)| x + Vector3::new(delta[6 + 3 * k], delta[7 + 3 * k], delta[8 + 3 * k]))
            .collect();
        BundleParam { pose: retract_pose(&p.pose, delta, 0), points }
    }
}

