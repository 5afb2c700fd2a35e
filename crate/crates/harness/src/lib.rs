//! Synthetic experiments, error metrics and report export built on the `sampson` crate.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod report;
pub mod scene;

pub use config::SceneConfig;
pub use error::{HarnessError, Result};
pub use experiments::{recompute_aggregates, RunOptions};
pub use report::{export, ExperimentReport, Format};
