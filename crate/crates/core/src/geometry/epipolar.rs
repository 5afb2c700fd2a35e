use nalgebra::{DMatrix, Matrix3, Matrix4, Vector2, Vector3, Vector4};

use super::pose::CameraPose;
use crate::error::{Error, Result};
use crate::linalg::skew;
use crate::poly::MultiPoly;

/// Essential matrix, normalized to Frobenius norm `sqrt(2)` when built from a pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssentialMatrix(Matrix3<f64>);

impl EssentialMatrix {
    /// Wraps an arbitrary 3x3 matrix (no manifold projection).
    pub fn from_matrix(e: Matrix3<f64>) -> Self {
        EssentialMatrix(e)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Same matrix rescaled to Frobenius norm `sqrt(2)`.
    pub fn normalized(&self) -> Self {
        let n = self.0.norm();
        if n == 0.0 {
            *self
        } else {
            EssentialMatrix(self.0 * (2f64.sqrt() / n))
        }
    }
}

/// `E = [t]x R`, normalized to `|E|_F = sqrt(2)`.
pub fn essential_from_pose(pose: &CameraPose) -> Result<EssentialMatrix> {
    let t = pose.translation();
    if !(t.norm() > 0.0) {
        return Err(Error::ZeroTranslation);
    }
    Ok(EssentialMatrix(skew(t) * pose.rotation()).normalized())
}

fn hom(x: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(x.x, x.y, 1.0)
}

/// `c = x2^T E x1` and its gradient with respect to `(x1, y1, x2, y2)`.
pub fn epipolar_constraint(x1: &Vector2<f64>, x2: &Vector2<f64>, e: &Matrix3<f64>) -> (f64, Vector4<f64>) {
    let h1 = hom(x1);
    let h2 = hom(x2);
    let l2 = e * h1;
    let l1 = e.transpose() * h2;
    (h2.dot(&l2), Vector4::new(l1.x, l1.y, l2.x, l2.y))
}

/// Epipolar constraint as a polynomial in `(x1, y1, x2, y2)`.
pub fn epipolar_poly(e: &Matrix3<f64>) -> MultiPoly {
    let mut terms: Vec<([u16; 4], f64)> = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let mut ex = [0u16; 4];
            if i < 2 {
                ex[2 + i] = 1;
            }
            if j < 2 {
                ex[j] = 1;
            }
            terms.push((ex, e[(i, j)]));
        }
    }
    MultiPoly::from_terms(4, terms).expect("four exponents")
}

/// Hessian of the epipolar constraint with respect to `(x1, y1, x2, y2)`; constant in the points.
pub fn epipolar_hessian(e: &Matrix3<f64>) -> Matrix4<f64> {
    let mut h = Matrix4::zeros();
    for a in 0..2 {
        for b in 0..2 {
            h[(a, 2 + b)] = e[(b, a)];
            h[(2 + b, a)] = e[(b, a)];
        }
    }
    h
}

/// Per-correspondence values of the two-view error functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoViewLosses {
    /// `|c| / |J|`.
    pub sampson: f64,
    /// Root of the summed squared point-to-epipolar-line distances in both images.
    pub sym_epipolar: f64,
    /// `c^2`.
    pub algebraic: f64,
    /// Mean squared cosine between the epipolar-plane normals and the opposite bearings.
    pub cosine: f64,
}

/// Evaluates all two-view error functions; `E` is used as given.
pub fn twoview_losses(x1: &Vector2<f64>, x2: &Vector2<f64>, e: &Matrix3<f64>) -> TwoViewLosses {
    let h1 = hom(x1);
    let h2 = hom(x2);
    let l2 = e * h1;
    let l1 = e.transpose() * h2;
    let c = h2.dot(&l2);
    let a2 = l1.x * l1.x + l1.y * l1.y;
    let b2 = l2.x * l2.x + l2.y * l2.y;
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let sampson = ratio(c.abs(), (a2 + b2).sqrt());
    let sym_epipolar = ratio(c * c, a2) + ratio(c * c, b2);
    let cos2 = ratio(c * c, h2.norm_squared() * l2.norm_squared());
    let cos1 = ratio(c * c, h1.norm_squared() * l1.norm_squared());
    TwoViewLosses { sampson, sym_epipolar: sym_epipolar.sqrt(), algebraic: c * c, cosine: 0.5 * (cos1 + cos2) }
}

fn hartley_normalizer(pts: &[Vector2<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let md = pts.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if md > 0.0 { 2f64.sqrt() / md } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

/// Projects onto the essential manifold: singular values `(s, s, 0)`, then Frobenius `sqrt(2)`.
pub fn project_to_essential(m: &Matrix3<f64>) -> EssentialMatrix {
    let svd = m.svd(true, true);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).expect("finite"));
    let u = svd.u.expect("u");
    let vt = svd.v_t.expect("v_t");
    let mut e = Matrix3::zeros();
    for &k in &idx[..2] {
        e += u.column(k) * vt.row(k);
    }
    EssentialMatrix(e).normalized()
}

/// Normalized eight-point estimate projected to the essential manifold.
pub fn essential_dlt(corrs: &[(Vector2<f64>, Vector2<f64>)]) -> Result<EssentialMatrix> {
    if corrs.len() < 8 {
        return Err(Error::DegenerateConfiguration(format!("need at least 8 correspondences, got {}", corrs.len())));
    }
    let p1: Vec<_> = corrs.iter().map(|c| c.0).collect();
    let p2: Vec<_> = corrs.iter().map(|c| c.1).collect();
    let t1 = hartley_normalizer(&p1);
    let t2 = hartley_normalizer(&p2);
    let rows = corrs.len().max(9);
    let mut a = DMatrix::zeros(rows, 9);
    for (k, (x1, x2)) in corrs.iter().enumerate() {
        let h1 = t1 * hom(x1);
        let h2 = t2 * hom(x2);
        for i in 0..3 {
            for j in 0..3 {
                a[(k, 3 * i + j)] = h2[i] * h1[j];
            }
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].partial_cmp(&svd.singular_values[x]).expect("finite"));
    let smax = svd.singular_values[order[0]];
    if svd.singular_values[order[7]] <= 1e-10 * smax {
        return Err(Error::DegenerateConfiguration("design matrix rank below 8".into()));
    }
    let v = vt.row(order[8]);
    let fmat = Matrix3::from_fn(|i, j| v[3 * i + j]);
    Ok(project_to_essential(&(t2.transpose() * fmat * t1)))
}

/// Linear triangulation of one correspondence with cameras `[I|0]` and `pose`.
pub fn triangulate_linear(x1: &Vector2<f64>, x2: &Vector2<f64>, pose: &CameraPose) -> Vector3<f64> {
    let p2 = pose.matrix();
    let mut a = Matrix4::zeros();
    a.set_row(0, &Vector4::new(-1.0, 0.0, x1.x, 0.0).transpose());
    a.set_row(1, &Vector4::new(0.0, -1.0, x1.y, 0.0).transpose());
    a.set_row(2, &(p2.row(2) * x2.x - p2.row(0)));
    a.set_row(3, &(p2.row(2) * x2.y - p2.row(1)));
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("v_t");
    let (imin, _) = svd.singular_values.argmin();
    let h = vt.row(imin);
    if h[3] == 0.0 {
        return Vector3::new(h[0], h[1], h[2]) * 1e12;
    }
    Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3])
}

/// Pose `(R, t)` with unit `t` whose essential matrix is `E`, chosen by cheirality on `corrs`.
pub fn decompose_essential(e: &EssentialMatrix, corrs: &[(Vector2<f64>, Vector2<f64>)]) -> Result<CameraPose> {
    let svd = e.matrix().svd(true, true);
    let mut u = svd.u.expect("u");
    let mut vt = svd.v_t.expect("v_t");
    let (imin, _) = svd.singular_values.argmin();
    // Move the null direction to the last column.
    if imin != 2 {
        u.swap_columns(imin, 2);
        vt.swap_rows(imin, 2);
    }
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if vt.determinant() < 0.0 {
        vt.row_mut(2).neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let t = u.column(2).into_owned();
    let mut best: Option<(usize, CameraPose)> = None;
    for r in [u * w * vt, u * w.transpose() * vt] {
        for s in [1.0, -1.0] {
            let pose = CameraPose::from_approx(&r, t * s);
            let count = corrs
                .iter()
                .filter(|(x1, x2)| {
                    let x = triangulate_linear(x1, x2, &pose);
                    x.z > 0.0 && pose.transform(&x).z > 0.0
                })
                .count();
            if best.as_ref().map_or(true, |(c, _)| count > *c) {
                best = Some((count, pose));
            }
        }
    }
    let (count, pose) = best.expect("four candidates");
    if count == 0 && !corrs.is_empty() {
        return Err(Error::DegenerateConfiguration("no decomposition has points in front of both cameras".into()));
    }
    Ok(pose)
}
