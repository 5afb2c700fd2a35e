//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_RTOL: f64 = 1e-12;

/// Moore-Penrose pseudo-inverse together with the numerical rank it was built with.
#[derive(Debug, Clone)]
pub struct Pinv {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min_kept: f64,
}

/// Pseudo-inverse via SVD, discarding singular values below `rtol * sigma_max`.
pub fn pinv(m: &DMatrix<f64>, rtol: f64) -> Pinv {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Pinv { matrix: DMatrix::zeros(c, r), rank: 0, sigma_max: 0.0, sigma_min_kept: 0.0 };
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rtol * smax;
    let mut out = DMatrix::zeros(c, r);
    let mut rank = 0;
    let mut smin = f64::INFINITY;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            smin = smin.min(s);
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    Pinv { matrix: out, rank, sigma_max: smax, sigma_min_kept: if rank > 0 { smin } else { 0.0 } }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Orthonormal basis of the null space of `m` (columns), using the same rank cutoff as `pinv`.
pub fn null_space(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // Pad to at least n rows so the full right singular basis is available.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| !(s > rtol * smax && s > 0.0))
        .map(|(k, _)| vt.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix `exp([w]x)`.
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*w).into_inner()
}

/// Two unit vectors completing `t` (assumed nonzero) to an orthonormal frame.
pub fn tangent_basis(t: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let t = t.normalize();
    let a = if t.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let b1 = (a - t * t.dot(&a)).normalize();
    let b2 = t.cross(&b1);
    (b1, b2)
}

/// Rotation angle of `r` in radians, robust near 0 and pi.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let s = 0.5
        * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    s.atan2(c)
}

/// Nearest rotation in Frobenius norm.
pub fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u");
    let vt = svd.v_t.expect("v_t");
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// Symmetric part of a square matrix.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_one() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let p = pinv(&j, RANK_RTOL);
        assert_eq!(p.rank, 1);
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 0.0]);
        assert!((p.matrix - expect).norm() < 1e-14);
    }

    #[test]
    fn null_space_of_row() {
        let j = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        let z = null_space(&j, RANK_RTOL);
        assert_eq!(z.ncols(), 2);
        assert!((&j * &z).norm() < 1e-14);
        assert!((z.transpose() * &z - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn skew_matches_cross() {
        let a = Vector3::new(1.0, -2.0, 0.5);
        let b = Vector3::new(0.3, 0.7, -1.1);
        assert!((skew(&a) * b - a.cross(&b)).norm() < 1e-15);
    }

    #[test]
    fn rotation_angle_roundtrip() {
        for &ang in &[0.0, 1e-9, 0.3, 1.5, 3.0] {
            let r = so3_exp(&(Vector3::new(1.0, 2.0, -1.0).normalize() * ang));
            assert!((rotation_angle(&r) - ang).abs() < 1e-12);
        }
    }
}
