#![allow(dead_code)]

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sampson::geometry::CameraPose;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

pub fn gauss3(r: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(gauss(r), gauss(r), gauss(r))
}

pub fn gauss2(r: &mut ChaCha8Rng) -> Vector2<f64> {
    Vector2::new(gauss(r), gauss(r))
}

/// Pose with rotation up to about `max_angle` radians and translation of norm in `[0.5, 2]`.
pub fn random_pose(r: &mut ChaCha8Rng, max_angle: f64) -> CameraPose {
    let axis = gauss3(r).normalize();
    let angle = r.random_range(0.0..max_angle);
    let t = gauss3(r).normalize() * r.random_range(0.5..2.0);
    CameraPose::from_rotation_vector(&(axis * angle), t)
}

/// Point in front of the first camera at depth `(2, 10)` within a 70 degree cone.
pub fn random_point(r: &mut ChaCha8Rng) -> Vector3<f64> {
    let h = (35f64).to_radians().tan();
    let d = r.random_range(2.0..10.0);
    Vector3::new(r.random_range(-h..h) * d, r.random_range(-h..h) * d, d)
}

/// Projections of a random point into every pose, retried until all depths are positive.
pub fn visible_point(r: &mut ChaCha8Rng, poses: &[CameraPose]) -> (Vector3<f64>, Vec<Vector2<f64>>) {
    loop {
        let x = random_point(r);
        let proj: Option<Vec<_>> = poses.iter().map(|p| p.project(&x)).collect();
        if let Some(p) = proj {
            if p.iter().all(|v| v.amax() < 2.0) {
                return (x, p);
            }
        }
    }
}
