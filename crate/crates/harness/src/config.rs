//! Synthetic scene configuration.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Camera rig, noise and sampling parameters for synthetic data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub fov_deg: f64,
    /// Square image side in pixels.
    pub image_size: u32,
    pub noise_sigma_px: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub n_cameras: usize,
    /// Range of camera-center distances from the first camera.
    pub baseline: [f64; 2],
    pub max_rotation_deg: f64,
    /// Depth range of the points in the first camera.
    pub depth: [f64; 2],
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            fov_deg: 70.0,
            image_size: 1000,
            noise_sigma_px: 1.0,
            n_samples: 10_000,
            seed: 0,
            n_cameras: 3,
            baseline: [0.5, 2.0],
            max_rotation_deg: 30.0,
            depth: [2.0, 10.0],
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad("fov_deg must lie in (0, 180)");
        }
        if self.image_size == 0 {
            return bad("image_size must be positive");
        }
        if !(self.noise_sigma_px >= 0.0) || !self.noise_sigma_px.is_finite() {
            return bad("noise sigma must be finite and nonnegative");
        }
        if !(2..=3).contains(&self.n_cameras) {
            return bad("camera count must be 2 or 3");
        }
        if !(self.baseline[0] > 0.0 && self.baseline[0] <= self.baseline[1]) {
            return bad("baseline range must be positive and ordered");
        }
        if !(self.depth[0] > 0.0 && self.depth[0] < self.depth[1]) {
            return bad("depth range must be positive and ordered");
        }
        if !(self.max_rotation_deg >= 0.0 && self.max_rotation_deg < 180.0) {
            return bad("max rotation must lie in [0, 180)");
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.image_size as f64 / (0.5 * self.fov_deg).to_radians().tan()
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        SceneConfig { noise_sigma_px: sigma, ..self.clone() }
    }
}
