use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x2, Matrix3x4, Matrix4, Vector2, Vector3};

use super::Linearization;
use crate::error::{Error, Result};
use crate::linalg::skew;
use crate::sampson::{pseudo_sampson, sampson_general, sampson_least_squares, Covariance, PseudoNorm};

/// Trifocal tensor as three 3x3 slices, normalized to unit Frobenius norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrifocalTensor {
    slices: [Matrix3<f64>; 3],
}

impl TrifocalTensor {
    pub fn from_slices(slices: [Matrix3<f64>; 3]) -> Self {
        TrifocalTensor { slices }
    }

    pub fn slices(&self) -> &[Matrix3<f64>; 3] {
        &self.slices
    }

    /// `sum_k x_k T_k`.
    pub fn contract(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        self.slices[0] * x[0] + self.slices[1] * x[1] + self.slices[2] * x[2]
    }

    fn frobenius(&self) -> f64 {
        self.slices.iter().map(|s| s.norm_squared()).sum::<f64>().sqrt()
    }
}

/// Tensor of three cameras after moving the first to `[I | 0]`.
pub fn trifocal_from_cameras(p1: &Matrix3x4<f64>, p2: &Matrix3x4<f64>, p3: &Matrix3x4<f64>) -> Result<TrifocalTensor> {
    let m = p1.fixed_view::<3, 3>(0, 0).into_owned();
    let svd = m.svd(false, false);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-10 * smax) {
        return Err(Error::DegenerateFrame);
    }
    let minv = m.try_inverse().ok_or(Error::DegenerateFrame)?;
    let mut h = Matrix4::identity();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&minv);
    h.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-minv * p1.column(3)));
    let a = p2 * h;
    let b = p3 * h;
    let a4 = a.column(3).into_owned();
    let b4 = b.column(3).into_owned();
    let scale = a.norm().max(b.norm());
    // A camera sharing the first camera's center leaves no baseline to triangulate from.
    if a4.norm() <= 1e-10 * scale || b4.norm() <= 1e-10 * scale {
        return Err(Error::DegenerateFrame);
    }
    let slices = [0, 1, 2].map(|k| a.column(k) * b4.transpose() - a4 * b.column(k).transpose());
    let t = TrifocalTensor { slices };
    let n = t.frobenius();
    if !(n > 0.0) {
        return Err(Error::DegenerateFrame);
    }
    Ok(TrifocalTensor { slices: slices.map(|s| s / n) })
}

fn hom(x: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(x.x, x.y, 1.0)
}

/// Orthonormal basis of the complement of `(x, y, 1)` and its derivatives with respect to `x` and `y`.
///
/// `u1 = normalize(0, -1, y)`, `u2 = normalize(x_hat x u1)`.
pub fn complement_basis(x: &Vector2<f64>) -> (Matrix3x2<f64>, [Matrix3x2<f64>; 2]) {
    let xh = hom(x);
    let a = Vector3::new(0.0, -1.0, x.y);
    let na = a.norm();
    let u1 = a / na;
    let du1_dy = (Matrix3::identity() - u1 * u1.transpose()) * Vector3::z() / na;
    let b = xh.cross(&u1);
    let nb = b.norm();
    let u2 = b / nb;
    let proj = (Matrix3::identity() - u2 * u2.transpose()) / nb;
    let du2_dx = proj * Vector3::x().cross(&u1);
    let du2_dy = proj * (Vector3::y().cross(&u1) + xh.cross(&du1_dy));
    let s = Matrix3x2::from_columns(&[u1, u2]);
    let dx = Matrix3x2::from_columns(&[Vector3::zeros(), du2_dx]);
    let dy = Matrix3x2::from_columns(&[du1_dy, du2_dy]);
    (s, [dx, dy])
}

/// Nine residuals `[x']x (sum_k x_k T_k) [x'']x` (row-major) and their Jacobian over the six coordinates.
pub fn c9_linearization(xs: &[Vector2<f64>; 3], t: &TrifocalTensor) -> Linearization {
    let (c, d) = c9_parts(xs, t);
    let mut jac = DMatrix::zeros(9, 6);
    for (col, dm) in d.iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                jac[(3 * i + j, col)] = dm[(i, j)];
            }
        }
    }
    Linearization { value: DVector::from_iterator(9, (0..9).map(|k| c[(k / 3, k % 3)])), jacobian: jac }
}

fn c9_parts(xs: &[Vector2<f64>; 3], t: &TrifocalTensor) -> (Matrix3<f64>, [Matrix3<f64>; 6]) {
    let x = hom(&xs[0]);
    let sp = skew(&hom(&xs[1]));
    let spp = skew(&hom(&xs[2]));
    let m = t.contract(&x);
    let c = sp * m * spp;
    let d = [
        sp * t.slices[0] * spp,
        sp * t.slices[1] * spp,
        skew(&Vector3::x()) * m * spp,
        skew(&Vector3::y()) * m * spp,
        sp * m * skew(&Vector3::x()),
        sp * m * skew(&Vector3::y()),
    ];
    (c, d)
}

/// Four residuals `S1^T C9 S2` (row-major 2x2) with `S1`, `S2` from [`complement_basis`] at `x'` and `x''`.
///
/// The bases move with the points and their derivatives enter the Jacobian.
pub fn c4_linearization(xs: &[Vector2<f64>; 3], t: &TrifocalTensor) -> Linearization {
    let (c9, d9) = c9_parts(xs, t);
    let (s1, ds1) = complement_basis(&xs[1]);
    let (s2, ds2) = complement_basis(&xs[2]);
    let c4 = s1.transpose() * c9 * s2;
    let mut jac = DMatrix::zeros(4, 6);
    for col in 0..6 {
        let mut d = s1.transpose() * d9[col] * s2;
        if col == 2 || col == 3 {
            d += ds1[col - 2].transpose() * c9 * s2;
        }
        if col == 4 || col == 5 {
            d += s1.transpose() * c9 * ds2[col - 4];
        }
        for a in 0..2 {
            for b in 0..2 {
                jac[(2 * a + b, col)] = d[(a, b)];
            }
        }
    }
    Linearization { value: DVector::from_iterator(4, (0..4).map(|k| c4[(k / 2, k % 2)])), jacobian: jac }
}

/// Pairwise epipolar residuals `[x'^T E12 x, x''^T E13 x, x''^T E23 x']`.
pub fn c3_linearization(xs: &[Vector2<f64>; 3], e12: &Matrix3<f64>, e13: &Matrix3<f64>, e23: &Matrix3<f64>) -> Linearization {
    let h: Vec<Vector3<f64>> = xs.iter().map(hom).collect();
    let mut value = DVector::zeros(3);
    let mut jac = DMatrix::zeros(3, 6);
    for (row, (e, a, b)) in [(e12, 0, 1), (e13, 0, 2), (e23, 1, 2)].into_iter().enumerate() {
        let la = e.transpose() * h[b];
        let lb = e * h[a];
        value[row] = h[b].dot(&lb);
        jac[(row, 2 * a)] = la.x;
        jac[(row, 2 * a + 1)] = la.y;
        jac[(row, 2 * b)] = lb.x;
        jac[(row, 2 * b + 1)] = lb.y;
    }
    Linearization { value, jacobian: jac }
}

/// Which rows form the mixed systems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixSelection {
    /// Rows of C4 kept in C4:3.
    pub c43_rows: Vec<usize>,
    /// Rows of C4 used in C4:1,3:2.
    pub c4132_c4_rows: Vec<usize>,
    /// Rows of C3 used in C4:1,3:2.
    pub c4132_c3_rows: Vec<usize>,
}

impl Default for MixSelection {
    fn default() -> Self {
        MixSelection { c43_rows: vec![0, 1, 2], c4132_c4_rows: vec![0], c4132_c3_rows: vec![0, 1] }
    }
}

impl MixSelection {
    pub fn validate(&self) -> Result<()> {
        let ok = |rows: &[usize], n: usize| rows.iter().all(|&r| r < n);
        if !ok(&self.c43_rows, 4) || !ok(&self.c4132_c4_rows, 4) || !ok(&self.c4132_c3_rows, 3) {
            return Err(Error::InvalidInput(format!("mixed-system row selection out of range: {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for MixSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c43=C4{:?};c4132=C4{:?}+C3{:?}", self.c43_rows, self.c4132_c4_rows, self.c4132_c3_rows)
    }
}

/// All three-view constraint systems linearized at one correspondence.
#[derive(Clone, Debug)]
pub struct ThreeViewSystems {
    pub c9: Linearization,
    pub c4: Linearization,
    pub c3: Linearization,
    pub c43: Linearization,
    pub c4132: Linearization,
}

pub fn threeview_systems(
    xs: &[Vector2<f64>; 3],
    t: &TrifocalTensor,
    e12: &Matrix3<f64>,
    e13: &Matrix3<f64>,
    e23: &Matrix3<f64>,
    sel: &MixSelection,
) -> Result<ThreeViewSystems> {
    sel.validate()?;
    let c9 = c9_linearization(xs, t);
    let c4 = c4_linearization(xs, t);
    let c3 = c3_linearization(xs, e12, e13, e23);
    let c43 = c4.select_rows(&sel.c43_rows);
    let c4132 = c4.select_rows(&sel.c4132_c4_rows).stack(&c3.select_rows(&sel.c4132_c3_rows));
    Ok(ThreeViewSystems { c9, c4, c3, c43, c4132 })
}

/// Every three-view error approximation, in the units of the input coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeViewErrors {
    pub e9: f64,
    pub e4: f64,
    pub e3: f64,
    pub e43: f64,
    pub e4132: f64,
    /// Root of the summed squared pairwise Sampson errors.
    pub pair: f64,
    /// Plain sum of the pairwise Sampson errors.
    pub pair_sum: f64,
    pub pseudo9: f64,
    pub pseudo4: f64,
    pub pseudo3: f64,
}

impl ThreeViewErrors {
    /// `e9` uses the least-squares pseudo-inverse step because C9 is generically inconsistent
    /// under noise; the smaller systems go through the range-checked general path.
    pub fn compute(s: &ThreeViewSystems, norm: PseudoNorm) -> Result<Self> {
        let id = Covariance::identity(6);
        let gen = |l: &Linearization| sampson_general(&l.value, &l.jacobian, &id).map(|r| r.error);
        let pseudo = |l: &Linearization| pseudo_sampson(&l.value, &l.jacobian, norm);
        let mut pairs = [0.0; 3];
        for (k, p) in pairs.iter_mut().enumerate() {
            let jn = s.c3.jacobian.row(k).norm();
            let c = s.c3.value[k];
            *p = if c == 0.0 {
                0.0
            } else if jn > 0.0 {
                c.abs() / jn
            } else {
                return Err(Error::ZeroJacobian);
            };
        }
        Ok(ThreeViewErrors {
            e9: sampson_least_squares(&s.c9.value, &s.c9.jacobian, &id)?.error,
            e4: gen(&s.c4)?,
            e3: gen(&s.c3)?,
            e43: gen(&s.c43)?,
            e4132: gen(&s.c4132)?,
            pair: pairs.iter().map(|p| p * p).sum::<f64>().sqrt(),
            pair_sum: pairs.iter().sum(),
            pseudo9: pseudo(&s.c9)?,
            pseudo4: pseudo(&s.c4)?,
            pseudo3: pseudo(&s.c3)?,
        })
    }

    /// Values scaled by `s`, e.g. a focal length converting normalized units to pixels.
    pub fn scaled(&self, s: f64) -> Self {
        ThreeViewErrors {
            e9: self.e9 * s,
            e4: self.e4 * s,
            e3: self.e3 * s,
            e43: self.e43 * s,
            e4132: self.e4132 * s,
            pair: self.pair * s,
            pair_sum: self.pair_sum * s,
            pseudo9: self.pseudo9 * s,
            pseudo4: self.pseudo4 * s,
            pseudo3: self.pseudo3 * s,
        }
    }

    /// `(name, value)` pairs in display order.
    pub fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("e3", self.e3),
            ("e4132", self.e4132),
            ("e43", self.e43),
            ("e4", self.e4),
            ("pair", self.pair),
            ("pair_sum", self.pair_sum),
            ("pseudo3", self.pseudo3),
            ("pseudo4", self.pseudo4),
            ("pseudo9", self.pseudo9),
            ("e9", self.e9),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pose::CameraPose;

    fn cams() -> [CameraPose; 3] {
        [
            CameraPose::identity(),
            CameraPose::from_rotation_vector(&Vector3::new(0.05, -0.1, 0.02), Vector3::new(-1.0, 0.1, 0.05)),
            CameraPose::from_rotation_vector(&Vector3::new(-0.08, 0.12, 0.0), Vector3::new(0.3, -0.9, 0.2)),
        ]
    }

    #[test]
    fn exact_projections_vanish() {
        let c = cams();
        let t = trifocal_from_cameras(&c[0].matrix(), &c[1].matrix(), &c[2].matrix()).unwrap();
        let x = Vector3::new(0.2, -0.3, 4.0);
        let xs = [c[0].project(&x).unwrap(), c[1].project(&x).unwrap(), c[2].project(&x).unwrap()];
        assert!(c9_linearization(&xs, &t).value.amax() < 1e-12);
        assert!(c4_linearization(&xs, &t).value.amax() < 1e-12);
    }

    #[test]
    fn same_center_is_degenerate() {
        let c = cams();
        assert_eq!(
            trifocal_from_cameras(&c[0].matrix(), &c[0].matrix(), &c[2].matrix()).unwrap_err(),
            Error::DegenerateFrame
        );
    }

    #[test]
    fn basis_is_orthonormal_complement() {
        let x = Vector2::new(0.4, -0.7);
        let (s, _) = complement_basis(&x);
        assert!((s.transpose() * s - nalgebra::Matrix2::identity()).amax() < 1e-14);
        assert!((s.transpose() * hom(&x)).amax() < 1e-14);
    }
}
