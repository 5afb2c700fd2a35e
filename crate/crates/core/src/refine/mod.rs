//! Nonlinear least-squares refinement with Sampson residuals and baseline losses.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

mod baselines;
mod jet;
mod lm;
mod models;

pub use baselines::{BaselineLoss, BundleParam, EpipolarBaseline, FullBundle, ReprojectionOnly, VpMidpoint};
pub use jet::{sampson_residual_and_jacobian, ConstraintJet, SampsonResidual};
pub use lm::{lm_minimize, Evaluation, FnProblem, LeastSquaresProblem, LmOptions, LmResult, LmSummary, RobustLoss, Termination};
pub use models::{
    retract_unit, EpipolarModel, EssentialParam, JetModel, PoseModel, SampsonLoss, ThreeViewC3Model, ThreeViewParam,
    VpModel,
};

use crate::error::{Error, Result};
use crate::geometry::epipolar::{decompose_essential, EssentialMatrix};
use crate::geometry::pose::CameraPose;
use crate::geometry::reproj::Match2D3D;

/// Loss minimized by [`refine_essential`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EssentialLoss {
    Sampson,
    SymEpipolar,
    Algebraic,
    Cosine,
}

/// Refined relative pose (unit translation) and the matching essential matrix.
#[derive(Clone, Debug)]
pub struct EssentialRefinement {
    pub essential: EssentialMatrix,
    pub pose: CameraPose,
    pub summary: LmSummary,
}

/// Refines from an essential matrix, decomposed by cheirality on `corrs`.
pub fn refine_essential(
    e0: &EssentialMatrix,
    corrs: &[(Vector2<f64>, Vector2<f64>)],
    loss: EssentialLoss,
    opts: &LmOptions,
) -> Result<EssentialRefinement> {
    let pose0 = decompose_essential(e0, corrs)?;
    refine_essential_from_pose(&pose0, corrs, loss, opts)
}

/// Minimizes the chosen loss over `SO(3) x S^2` starting at `pose0`.
pub fn refine_essential_from_pose(
    pose0: &CameraPose,
    corrs: &[(Vector2<f64>, Vector2<f64>)],
    loss: EssentialLoss,
    opts: &LmOptions,
) -> Result<EssentialRefinement> {
    let p0 = EssentialParam::from_pose(pose0)?;
    let corrs = corrs.to_vec();
    let out = match loss {
        EssentialLoss::Sampson => lm_minimize(&SampsonLoss::new(EpipolarModel { corrs }), p0, opts)?,
        other => {
            let loss = match other {
                EssentialLoss::SymEpipolar => BaselineLoss::SymEpipolar,
                EssentialLoss::Algebraic => BaselineLoss::Algebraic,
                _ => BaselineLoss::Cosine,
            };
            lm_minimize(&EpipolarBaseline { corrs, loss }, p0, opts)?
        }
    };
    Ok(EssentialRefinement {
        essential: EssentialMatrix::from_matrix(out.params.essential()).normalized(),
        pose: out.params.pose(),
        summary: out.summary,
    })
}

/// Minimizes the sum of covariance-weighted Sampson errors over the 6-DoF pose.
pub fn refine_pose_sampson(pose0: &CameraPose, matches: &[Match2D3D], opts: &LmOptions) -> Result<LmResult<CameraPose>> {
    lm_minimize(&SampsonLoss::new(PoseModel { matches: matches.to_vec() }), *pose0, opts)
}

/// Reprojection error with 2D covariance only, over the pose.
pub fn refine_reprojection_only(pose0: &CameraPose, matches: &[Match2D3D], opts: &LmOptions) -> Result<LmResult<CameraPose>> {
    lm_minimize(&ReprojectionOnly::new(matches.to_vec()), *pose0, opts)
}

/// Joint refinement of the pose and all 3D points; `summary.n_params` is `6 + 3 K`.
pub fn refine_full_bundle(pose0: &CameraPose, matches: &[Match2D3D], opts: &LmOptions) -> Result<LmResult<BundleParam>> {
    let p0 = BundleParam { pose: *pose0, points: matches.iter().map(|m| m.point).collect() };
    lm_minimize(&FullBundle::new(matches.to_vec()), p0, opts)
}

/// Loss minimized by [`refine_vp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VpLoss {
    Sampson,
    Midpoint,
}

/// Refines a unit vanishing point from line segments.
pub fn refine_vp(
    v0: &Vector3<f64>,
    segments: &[(Vector2<f64>, Vector2<f64>)],
    loss: VpLoss,
    opts: &LmOptions,
) -> Result<LmResult<Vector3<f64>>> {
    if !(v0.norm() > 0.0) {
        return Err(Error::InvalidInput("initial vanishing point is zero".into()));
    }
    let v0 = v0.normalize();
    let segments = segments.to_vec();
    match loss {
        VpLoss::Sampson => lm_minimize(&SampsonLoss::new(VpModel { segments }), v0, opts),
        VpLoss::Midpoint => lm_minimize(&VpMidpoint { segments }, v0, opts),
    }
}

/// Analytic and central-difference residual Jacobians of one datum.
#[derive(Clone, Debug)]
pub struct FdCheck {
    pub analytic: DMatrix<f64>,
    pub numeric: DMatrix<f64>,
    /// `max |analytic - numeric| / max(max |numeric|, 1e-12)`.
    pub max_rel_err: f64,
}

/// Compares `dr / dtheta` against central differences of `r` in local coordinates.
///
/// Fails with [`Error::RankCollapse`] when the numerical rank of `J_z` differs anywhere in the stencil.
pub fn finite_difference_check<M: JetModel>(model: &M, p: &M::Param, k: usize, h: f64) -> Result<FdCheck> {
    let sigma = model.covariance(k);
    let base = sampson_residual_and_jacobian(&model.jet(p, k, true)?, sigma, true)?;
    let analytic = base.dr.expect("requested");
    let np = model.n_params();
    let mut numeric = DMatrix::zeros(analytic.nrows(), np);
    for q in 0..np {
        let mut d = DVector::zeros(np);
        d[q] = h;
        let plus = sampson_residual_and_jacobian(&model.jet(&model.retract(p, &d), k, false)?, sigma, false)?;
        let minus = sampson_residual_and_jacobian(&model.jet(&model.retract(p, &(-d)), k, false)?, sigma, false)?;
        if plus.rank != base.rank || minus.rank != base.rank {
            return Err(Error::RankCollapse);
        }
        numeric.set_column(q, &((plus.r - minus.r) / (2.0 * h)));
    }
    let scale = numeric.amax().max(1e-12);
    let max_rel_err = (&analytic - &numeric).amax() / scale;
    Ok(FdCheck { analytic, numeric, max_rel_err })
}
