//! Seeded synthetic cameras, points and noisy projections.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sampson::geometry::CameraPose;

use crate::config::SceneConfig;
use crate::error::{HarnessError, Result};

/// Independent random streams derived from one user seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scene = 1,
    Bounds = 2,
    Vp = 3,
    Pose = 4,
    Refine = 5,
    Kappa = 6,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for sample `index` of `stream`; independent of thread scheduling.
pub fn sample_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let s = splitmix64(splitmix64(seed ^ splitmix64(stream as u64)) ^ index);
    ChaCha8Rng::seed_from_u64(s)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gauss2(rng: &mut ChaCha8Rng) -> Vector2<f64> {
    Vector2::new(gauss(rng), gauss(rng))
}

pub fn gauss3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(gauss(rng), gauss(rng), gauss(rng))
}

/// Uniform direction on the unit sphere.
pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = gauss3(rng);
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Pinhole intrinsics with square pixels and a centered principal point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub focal: f64,
    pub center: Vector2<f64>,
    pub size: f64,
}

impl Intrinsics {
    pub fn from_config(cfg: &SceneConfig) -> Self {
        let s = cfg.image_size as f64;
        Intrinsics { focal: cfg.focal(), center: Vector2::new(0.5 * s, 0.5 * s), size: s }
    }

    pub fn to_pixels(&self, x: &Vector2<f64>) -> Vector2<f64> {
        x * self.focal + self.center
    }

    pub fn to_normalized(&self, p: &Vector2<f64>) -> Vector2<f64> {
        (p - self.center) / self.focal
    }

    pub fn inside(&self, p: &Vector2<f64>) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.size && p.y < self.size
    }
}

/// One synthetic observation of a 3D point by every camera.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub index: usize,
    /// World-to-camera poses; the first is the identity.
    pub cameras: Vec<CameraPose>,
    pub point: Vector3<f64>,
    /// Noise-free projections in pixels.
    pub exact: Vec<Vector2<f64>>,
    /// Projections with i.i.d. Gaussian pixel noise.
    pub noisy: Vec<Vector2<f64>>,
}

impl Sample {
    pub fn noisy_normalized(&self, k: &Intrinsics) -> Vec<Vector2<f64>> {
        self.noisy.iter().map(|p| k.to_normalized(p)).collect()
    }
}

/// Pose whose center lies at a distance in the baseline range from the origin.
pub fn random_camera(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> CameraPose {
    let axis = random_unit(rng);
    let angle = rng.random_range(0.0..=cfg.max_rotation_deg.to_radians());
    let r = CameraPose::from_rotation_vector(&(axis * angle), Vector3::zeros());
    let center = random_unit(rng) * rng.random_range(cfg.baseline[0]..=cfg.baseline[1]);
    CameraPose::from_rotation_vector(&(axis * angle), -(r.rotation() * center))
}

/// Point inside the first camera's frustum at a depth within the configured range.
pub fn random_point_in_view(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> Vector3<f64> {
    let h = (0.5 * cfg.fov_deg).to_radians().tan();
    let d = rng.random_range(cfg.depth[0]..cfg.depth[1]);
    Vector3::new(rng.random_range(-h..h) * d, rng.random_range(-h..h) * d, d)
}

const MAX_RIGS: usize = 1000;
const MAX_POINTS_PER_RIG: usize = 100;

/// Draws sample `index`: cameras, a point visible in all views, and pixel noise.
///
/// The noise is drawn after the geometry from the same stream, so changing `sigma` rescales the
/// same noise vector on the same geometry.
pub fn gen_sample(cfg: &SceneConfig, index: usize) -> Result<Sample> {
    let k = Intrinsics::from_config(cfg);
    let mut rng = sample_rng(cfg.seed, Stream::Scene, index as u64);
    for _ in 0..MAX_RIGS {
        let mut cameras = vec![CameraPose::identity()];
        for _ in 1..cfg.n_cameras {
            cameras.push(random_camera(&mut rng, cfg));
        }
        for _ in 0..MAX_POINTS_PER_RIG {
            let x = random_point_in_view(&mut rng, cfg);
            let proj: Option<Vec<Vector2<f64>>> =
                cameras.iter().map(|c| c.project(&x).map(|p| k.to_pixels(&p))).collect();
            let Some(exact) = proj else { continue };
            if !exact.iter().all(|p| k.inside(p)) {
                continue;
            }
            let noisy = exact.iter().map(|p| p + gauss2(&mut rng) * cfg.noise_sigma_px).collect();
            return Ok(Sample { index, cameras, point: x, exact, noisy });
        }
    }
    Err(HarnessError::InvalidConfig(format!("no point visible in all views after {MAX_RIGS} rigs")))
}

/// All `n_samples` samples in index order.
pub fn gen_synthetic(cfg: &SceneConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    (0..cfg.n_samples).into_par_iter().map(|i| gen_sample(cfg, i)).collect()
}
