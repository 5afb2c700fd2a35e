//! Error summaries: AUC, pose errors, rank correlation.

use sampson::geometry::CameraPose;
use sampson::linalg::rotation_angle;

use crate::error::{HarnessError, Result};

/// Area under the empirical CDF of `errors` on `[0, tau]`, divided by `tau`.
///
/// Each error contributes `max(0, tau - e) / tau`; errors at or above `tau` contribute zero.
pub fn auc(errors: &[f64], tau: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(HarnessError::Empty("auc over no errors"));
    }
    if !(tau > 0.0) {
        return Err(HarnessError::InvalidConfig("auc threshold must be positive".into()));
    }
    let s: f64 = errors.iter().map(|&e| (tau - e.abs()).max(0.0)).sum();
    Ok((s / (tau * errors.len() as f64)).clamp(0.0, 1.0))
}

/// Rotation and translation errors with their maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseError {
    pub rot_deg: f64,
    /// Degrees between translation directions (relative pose) or centimetres (absolute pose).
    pub trans: f64,
    pub max: f64,
}

fn angle_between(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Relative-pose error; translation compared by direction only.
pub fn pose_error(est: &CameraPose, gt: &CameraPose) -> PoseError {
    let rot_deg = rotation_angle(&(est.rotation().transpose() * gt.rotation())).to_degrees();
    let (a, b) = (est.translation(), gt.translation());
    let trans = if a.norm() == 0.0 || b.norm() == 0.0 { 0.0 } else { angle_between(a, b).to_degrees() };
    PoseError { rot_deg, trans, max: rot_deg.max(trans) }
}

/// Absolute-pose error; camera centers compared in centimetres, scene units taken as metres.
pub fn absolute_pose_error(est: &CameraPose, gt: &CameraPose) -> PoseError {
    let rot_deg = rotation_angle(&(est.rotation().transpose() * gt.rotation())).to_degrees();
    let trans = (est.center() - gt.center()).norm() * 100.0;
    PoseError { rot_deg, trans, max: rot_deg.max(trans) }
}

/// Ranks starting at 1, ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` when a sample is constant or too short.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Median, averaging the two middle values for even lengths.
pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 0 { 0.5 * (s[m - 1] + s[m]) } else { s[m] })
}

/// Sample standard deviation.
pub fn std_dev(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt())
}
