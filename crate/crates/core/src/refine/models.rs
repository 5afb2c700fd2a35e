use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Vector2, Vector3};

use super::jet::{sampson_residual_and_jacobian, ConstraintJet};
use super::lm::{Evaluation, LeastSquaresProblem};
use crate::error::{Error, Result};
use crate::geometry::pose::CameraPose;
use crate::geometry::reproj::Match2D3D;
use crate::linalg::{skew, so3_exp, tangent_basis};
use crate::sampson::Covariance;

/// Parametric constraint family evaluated per datum, differentiated in local coordinates.
pub trait JetModel {
    type Param: Clone;

    fn n_params(&self) -> usize;

    fn n_data(&self) -> usize;

    /// Dimension of the measurement perturbed by the Sampson correction.
    fn n_meas(&self) -> usize;

    /// Jet of datum `k`; parameter derivatives are filled only when `with_derivs`.
    fn jet(&self, p: &Self::Param, k: usize, with_derivs: bool) -> Result<ConstraintJet>;

    fn covariance(&self, _k: usize) -> Option<&Covariance> {
        None
    }

    fn retract(&self, p: &Self::Param, delta: &DVector<f64>) -> Self::Param;
}

/// Sum of squared Sampson errors of every datum; constraints are multiplied by `scale`.
pub struct SampsonLoss<M> {
    pub model: M,
    pub scale: f64,
}

impl<M> SampsonLoss<M> {
    pub fn new(model: M) -> Self {
        SampsonLoss { model, scale: 1.0 }
    }
}

impl<M: JetModel> LeastSquaresProblem for SampsonLoss<M> {
    type Param = M::Param;

    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn block_len(&self) -> usize {
        self.model.n_meas()
    }

    fn evaluate(&self, p: &M::Param, with_jac: bool) -> Result<Evaluation> {
        let b = self.model.n_meas();
        let nd = self.model.n_data();
        let np = self.model.n_params();
        let mut residuals = DVector::zeros(b * nd);
        let mut jac = with_jac.then(|| DMatrix::zeros(b * nd, np));
        for k in 0..nd {
            let jet = self.model.jet(p, k, with_jac)?.scaled(self.scale);
            let out = sampson_residual_and_jacobian(&jet, self.model.covariance(k), with_jac)?;
            residuals.rows_mut(k * b, b).copy_from(&out.r);
            if let (Some(j), Some(dr)) = (jac.as_mut(), out.dr) {
                j.rows_mut(k * b, b).copy_from(&dr);
            }
        }
        Ok(Evaluation { residuals, jacobian: jac })
    }

    fn retract(&self, p: &M::Param, delta: &DVector<f64>) -> M::Param {
        self.model.retract(p, delta)
    }
}

fn hom(x: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(x.x, x.y, 1.0)
}

fn basis(k: usize) -> Vector3<f64> {
    Vector3::ith(k, 1.0)
}

/// Relative pose on `SO(3) x S^2` with `E = [t]x R`, `|t| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssentialParam {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl EssentialParam {
    pub fn from_pose(pose: &CameraPose) -> Result<Self> {
        let t = pose.translation();
        if !(t.norm() > 0.0) {
            return Err(Error::ZeroTranslation);
        }
        Ok(EssentialParam { r: *pose.rotation(), t: t.normalize() })
    }

    pub fn essential(&self) -> Matrix3<f64> {
        skew(&self.t) * self.r
    }

    pub fn pose(&self) -> CameraPose {
        CameraPose::from_approx(&self.r, self.t)
    }

    /// `R <- R exp([w]x)`, `t <- normalize(t + B d)`.
    pub fn retract(&self, delta: &DVector<f64>) -> Self {
        let w = Vector3::new(delta[0], delta[1], delta[2]);
        let (b1, b2) = tangent_basis(&self.t);
        EssentialParam { r: self.r * so3_exp(&w), t: (self.t + b1 * delta[3] + b2 * delta[4]).normalize() }
    }

    /// `dE` along each of the five local directions.
    pub fn essential_derivatives(&self) -> [Matrix3<f64>; 5] {
        let tx = skew(&self.t);
        let (b1, b2) = tangent_basis(&self.t);
        [
            tx * self.r * skew(&basis(0)),
            tx * self.r * skew(&basis(1)),
            tx * self.r * skew(&basis(2)),
            skew(&b1) * self.r,
            skew(&b2) * self.r,
        ]
    }
}

/// Epipolar constraint per correspondence over the essential manifold.
pub struct EpipolarModel {
    pub corrs: Vec<(Vector2<f64>, Vector2<f64>)>,
}

/// Value, measurement Jacobian and their derivatives along `des` for `x2^T E x1`.
fn epipolar_jet(x1: &Vector2<f64>, x2: &Vector2<f64>, e: &Matrix3<f64>, des: Option<&[Matrix3<f64>]>) -> ConstraintJet {
    let h1 = hom(x1);
    let h2 = hom(x2);
    let l2 = e * h1;
    let l1 = e.transpose() * h2;
    let c = DVector::from_element(1, h2.dot(&l2));
    let jz = DMatrix::from_row_slice(1, 4, &[l1.x, l1.y, l2.x, l2.y]);
    let Some(des) = des else {
        return ConstraintJet::value_only(c, jz);
    };
    let mut dc = DMatrix::zeros(1, des.len());
    let mut djz = Vec::with_capacity(des.len());
    for (k, de) in des.iter().enumerate() {
        let dl2 = de * h1;
        let dl1 = de.transpose() * h2;
        dc[(0, k)] = h2.dot(&dl2);
        djz.push(DMatrix::from_row_slice(1, 4, &[dl1.x, dl1.y, dl2.x, dl2.y]));
    }
    ConstraintJet { c, jz, dc, djz }
}

impl JetModel for EpipolarModel {
    type Param = EssentialParam;

    fn n_params(&self) -> usize {
        5
    }

    fn n_data(&self) -> usize {
        self.corrs.len()
    }

    fn n_meas(&self) -> usize {
        4
    }

    fn jet(&self, p: &EssentialParam, k: usize, with_derivs: bool) -> Result<ConstraintJet> {
        let (x1, x2) = &self.corrs[k];
        let des = with_derivs.then(|| p.essential_derivatives());
        Ok(epipolar_jet(x1, x2, &p.essential(), des.as_ref().map(|d| &d[..])))
    }

    fn retract(&self, p: &EssentialParam, delta: &DVector<f64>) -> EssentialParam {
        p.retract(delta)
    }
}

/// Left retraction `R <- exp([w]x) R`, `t <- t + d` over six local coordinates starting at `offset`.
pub(crate) fn retract_pose(p: &CameraPose, delta: &DVector<f64>, offset: usize) -> CameraPose {
    let w = Vector3::new(delta[offset], delta[offset + 1], delta[offset + 2]);
    let dt = Vector3::new(delta[offset + 3], delta[offset + 4], delta[offset + 5]);
    p.perturbed(&w, &dt)
}

/// Covariance-weighted reprojection constraints of 2D/3D matches over a 6-DoF pose.
pub struct PoseModel {
    pub matches: Vec<Match2D3D>,
}

impl JetModel for PoseModel {
    type Param = CameraPose;

    fn n_params(&self) -> usize {
        6
    }

    fn n_data(&self) -> usize {
        self.matches.len()
    }

    fn n_meas(&self) -> usize {
        5
    }

    fn jet(&self, pose: &CameraPose, k: usize, with_derivs: bool) -> Result<ConstraintJet> {
        let m = &self.matches[k];
        let rx = pose.rotation() * m.point;
        let p = rx + pose.translation();
        if p.norm() <= 1e-12 * (1.0 + m.point.norm()) {
            return Err(Error::PointAtCamera);
        }
        let a = Matrix2x3::new(1.0, 0.0, -m.x.x, 0.0, 1.0, -m.x.y);
        let ar = a * pose.rotation();
        let c = DVector::from_column_slice((a * p).as_slice());
        let mut jz = DMatrix::zeros(2, 5);
        jz[(0, 0)] = -p.z;
        jz[(1, 1)] = -p.z;
        jz.view_mut((0, 2), (2, 3)).copy_from(&ar);
        if !with_derivs {
            return Ok(ConstraintJet::value_only(c, jz));
        }
        let mut dc = DMatrix::zeros(2, 6);
        let mut djz = Vec::with_capacity(6);
        for k in 0..3 {
            let ek = skew(&basis(k));
            let dp = basis(k).cross(&rx);
            dc.column_mut(k).copy_from(&(a * dp));
            let mut d = DMatrix::zeros(2, 5);
            d[(0, 0)] = -dp.z;
            d[(1, 1)] = -dp.z;
            d.view_mut((0, 2), (2, 3)).copy_from(&(a * ek * pose.rotation()));
            djz.push(d);
        }
        for j in 0..3 {
            let dp = basis(j);
            dc.column_mut(3 + j).copy_from(&(a * dp));
            let mut d = DMatrix::zeros(2, 5);
            d[(0, 0)] = -dp.z;
            d[(1, 1)] = -dp.z;
            djz.push(d);
        }
        Ok(ConstraintJet { c, jz, dc, djz })
    }

    fn covariance(&self, k: usize) -> Option<&Covariance> {
        Some(self.matches[k].covariance())
    }

    fn retract(&self, p: &CameraPose, delta: &DVector<f64>) -> CameraPose {
        retract_pose(p, delta, 0)
    }
}

/// `v <- normalize(v + B d)` with `B` from [`tangent_basis`].
pub fn retract_unit(v: &Vector3<f64>, delta: &DVector<f64>) -> Vector3<f64> {
    let (b1, b2) = tangent_basis(v);
    (v + b1 * delta[0] + b2 * delta[1]).normalize()
}

/// Segment/vanishing-point constraints over the unit sphere.
pub struct VpModel {
    pub segments: Vec<(Vector2<f64>, Vector2<f64>)>,
}

impl JetModel for VpModel {
    type Param = Vector3<f64>;

    fn n_params(&self) -> usize {
        2
    }

    fn n_data(&self) -> usize {
        self.segments.len()
    }

    fn n_meas(&self) -> usize {
        4
    }

    fn jet(&self, v: &Vector3<f64>, k: usize, with_derivs: bool) -> Result<ConstraintJet> {
        let (x1, x2) = &self.segments[k];
        let h1 = hom(x1);
        let h2 = hom(x2);
        let n = h1.cross(&h2);
        let row = |v: &Vector3<f64>| {
            let g1 = h2.cross(v);
            let g2 = v.cross(&h1);
            DMatrix::from_row_slice(1, 4, &[g1.x, g1.y, g2.x, g2.y])
        };
        let c = DVector::from_element(1, v.dot(&n));
        let jz = row(v);
        if !with_derivs {
            return Ok(ConstraintJet::value_only(c, jz));
        }
        let (b1, b2) = tangent_basis(v);
        let dc = DMatrix::from_row_slice(1, 2, &[b1.dot(&n), b2.dot(&n)]);
        Ok(ConstraintJet { c, jz, dc, djz: vec![row(&b1), row(&b2)] })
    }

    fn retract(&self, v: &Vector3<f64>, delta: &DVector<f64>) -> Vector3<f64> {
        retract_unit(v, delta)
    }
}

/// Poses of cameras two and three; camera one is `[I | 0]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeViewParam {
    pub pose2: CameraPose,
    pub pose3: CameraPose,
}

impl ThreeViewParam {
    /// `(E12, E13, E23)` without normalization.
    pub fn essentials(&self) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
        let (r2, t2) = (self.pose2.rotation(), self.pose2.translation());
        let (r3, t3) = (self.pose3.rotation(), self.pose3.translation());
        let r23 = r3 * r2.transpose();
        let t23 = t3 - r23 * t2;
        (skew(t2) * r2, skew(t3) * r3, skew(&t23) * r23)
    }
}

/// The three pairwise epipolar constraints of a point triple, jointly, over both poses.
pub struct ThreeViewC3Model {
    pub triples: Vec<[Vector2<f64>; 3]>,
}

impl ThreeViewC3Model {
    /// Derivatives of `(E12, E13, E23)` along the twelve local coordinates.
    fn essential_derivatives(p: &ThreeViewParam) -> Vec<[Matrix3<f64>; 3]> {
        let (r2, t2) = (p.pose2.rotation(), p.pose2.translation());
        let (r3, t3) = (p.pose3.rotation(), p.pose3.translation());
        let r23 = r3 * r2.transpose();
        let t23 = t3 - r23 * t2;
        let z = Matrix3::zeros();
        let de23 = |dt: Vector3<f64>, dr: Matrix3<f64>| skew(&dt) * r23 + skew(&t23) * dr;
        let mut out = Vec::with_capacity(12);
        for k in 0..3 {
            let ek = skew(&basis(k));
            let dr23 = -r23 * ek;
            out.push([skew(t2) * ek * r2, z, de23(r23 * ek * t2, dr23)]);
        }
        for j in 0..3 {
            out.push([skew(&basis(j)) * r2, z, de23(-(r23 * basis(j)), z)]);
        }
        for k in 0..3 {
            let ek = skew(&basis(k));
            let dr23 = ek * r23;
            out.push([z, skew(t3) * ek * r3, de23(-(ek * r23 * t2), dr23)]);
        }
        for j in 0..3 {
            out.push([z, skew(&basis(j)) * r3, de23(basis(j), z)]);
        }
        out
    }
}

impl JetModel for ThreeViewC3Model {
    type Param = ThreeViewParam;

    fn n_params(&self) -> usize {
        12
    }

    fn n_data(&self) -> usize {
        self.triples.len()
    }

    fn n_meas(&self) -> usize {
        6
    }

    fn jet(&self, p: &ThreeViewParam, k: usize, with_derivs: bool) -> Result<ConstraintJet> {
        let xs = &self.triples[k];
        let (e12, e13, e23) = p.essentials();
        let es = [e12, e13, e23];
        let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
        let ders = with_derivs.then(|| Self::essential_derivatives(p));
        let mut c = DVector::zeros(3);
        let mut jz = DMatrix::zeros(3, 6);
        let np = if with_derivs { 12 } else { 0 };
        let mut dc = DMatrix::zeros(3, np);
        let mut djz = vec![DMatrix::zeros(3, 6); np];
        for (row, &(a, b)) in pairs.iter().enumerate() {
            let des: Option<Vec<Matrix3<f64>>> = ders.as_ref().map(|d| d.iter().map(|m| m[row]).collect());
            let j = epipolar_jet(&xs[a], &xs[b], &es[row], des.as_deref());
            c[row] = j.c[0];
            for (src, dst) in [(0, 2 * a), (1, 2 * a + 1), (2, 2 * b), (3, 2 * b + 1)] {
                jz[(row, dst)] = j.jz[(0, src)];
                for q in 0..np {
                    djz[q][(row, dst)] = j.djz[q][(0, src)];
                }
            }
            for q in 0..np {
                dc[(row, q)] = j.dc[(0, q)];
            }
        }
        Ok(ConstraintJet { c, jz, dc, djz })
    }

    fn retract(&self, p: &ThreeViewParam, delta: &DVector<f64>) -> ThreeViewParam {
        ThreeViewParam { pose2: retract_pose(&p.pose2, delta, 0), pose3: retract_pose(&p.pose3, delta, 6) }
    }
}
