//! Experiment drivers. Each one is a pure function of its configuration and seed.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::report::{Aggregate, ExperimentReport, Record};

pub mod bounds;
pub mod point;
pub mod pose2d3d;
pub mod relpose;
pub mod threeview;
pub mod twoview;
pub mod vp;

/// Execution settings that do not affect results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
    /// Attach wall-clock timings to the report.
    pub timings: bool,
}

/// Maps `f` over `0..n` on the worker pool, returning results in index order.
pub(crate) fn par_map<T, F>(opts: &RunOptions, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if opts.threads == 0 {
        return Ok((0..n).into_par_iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| HarnessError::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub(crate) fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// Records of one group, in order of first appearance.
pub(crate) fn grouped(records: &[Record]) -> Vec<(String, Vec<&Record>)> {
    let mut out: Vec<(String, Vec<&Record>)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(g, _)| *g == r.group) {
            Some((_, v)) => v.push(r),
            None => out.push((r.group.clone(), vec![r])),
        }
    }
    out
}

pub(crate) fn column(rs: &[&Record], key: &str) -> Vec<f64> {
    rs.iter().filter_map(|r| r.get(key)).collect()
}

/// Recomputes the aggregates of a report from its records alone.
pub fn recompute_aggregates(experiment: &str, records: &[Record]) -> Result<Vec<Aggregate>> {
    match experiment {
        threeview::NAME => threeview::aggregate(records),
        twoview::NAME => twoview::aggregate(records),
        vp::NAME => vp::aggregate(records),
        pose2d3d::NAME => pose2d3d::aggregate(records),
        relpose::NAME => relpose::aggregate(records),
        bounds::ELLIPSE_NAME => bounds::ellipse_aggregate(records),
        bounds::KAPPA_NAME => bounds::kappa_aggregate(records),
        point::NAME => Ok(Vec::new()),
        other => Err(HarnessError::InvalidConfig(format!("unknown experiment `{other}`"))),
    }
}

pub(crate) fn finish(mut report: ExperimentReport) -> Result<ExperimentReport> {
    report.aggregates = recompute_aggregates(&report.experiment, &report.records)?;
    Ok(report)
}
