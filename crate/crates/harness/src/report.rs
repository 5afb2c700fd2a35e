//! Experiment reports and their CSV / JSON serialization.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Share of excluded samples above which a run is degraded.
pub const DEGRADED_FAILURE_RATE: f64 = 1e-3;

/// One per-sample row; absent keys mean the quantity is undefined for that sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sample: usize,
    pub group: String,
    pub values: BTreeMap<String, f64>,
}

impl Record {
    pub fn new(sample: usize, group: impl Into<String>) -> Self {
        Record { sample, group: group.into(), values: BTreeMap::new() }
    }

    /// Stores finite values only.
    pub fn set(&mut self, key: &str, v: f64) -> &mut Self {
        if v.is_finite() {
            self.values.insert(key.to_string(), v);
        }
        self
    }

    pub fn flag(&mut self, key: &str, b: bool) -> &mut Self {
        self.set(key, if b { 1.0 } else { 0.0 })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// A sample excluded from the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub sample: usize,
    pub group: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub experiment: String,
    pub seed: u64,
    /// Echo of the configuration that produced the report.
    pub config: serde_json::Value,
    pub metadata: BTreeMap<String, String>,
    /// Samples attempted across all groups.
    pub n_requested: usize,
    pub records: Vec<Record>,
    pub failures: Vec<Failure>,
    pub aggregates: Vec<Aggregate>,
    /// Wall-clock timings; only present when requested, since they break byte-identical reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64, config: serde_json::Value) -> Self {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            experiment: experiment.to_string(),
            seed,
            config,
            metadata: BTreeMap::new(),
            n_requested: 0,
            records: Vec::new(),
            failures: Vec::new(),
            aggregates: Vec::new(),
            timings_ms: None,
        }
    }

    /// Appends per-sample outcomes in order.
    pub fn extend_outcomes(&mut self, outcomes: impl IntoIterator<Item = std::result::Result<Record, Failure>>) {
        for o in outcomes {
            self.n_requested += 1;
            match o {
                Ok(r) => self.records.push(r),
                Err(f) => self.failures.push(f),
            }
        }
    }

    pub fn push_aggregate(&mut self, group: &str, name: &str, value: f64) {
        self.aggregates.push(Aggregate { group: group.to_string(), name: name.to_string(), value });
    }

    pub fn aggregate(&self, group: &str, name: &str) -> Option<f64> {
        self.aggregates.iter().find(|a| a.group == group && a.name == name).map(|a| a.value)
    }

    /// Values of `key` over the records of `group`, skipping records where it is undefined.
    pub fn column(&self, group: &str, key: &str) -> Vec<f64> {
        self.records.iter().filter(|r| r.group == group).filter_map(|r| r.get(key)).collect()
    }

    pub fn groups(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.group) {
                seen.push(r.group.clone());
            }
        }
        seen
    }

    pub fn failure_rate(&self) -> f64 {
        if self.n_requested == 0 {
            0.0
        } else {
            self.failures.len() as f64 / self.n_requested as f64
        }
    }

    pub fn is_degraded(&self) -> bool {
        self.failure_rate() > DEGRADED_FAILURE_RATE
    }

    pub fn add_timing(&mut self, key: &str, ms: f64) {
        *self.timings_ms.get_or_insert_with(BTreeMap::new).entry(key.to_string()).or_insert(0.0) += ms;
    }

    /// Checks `records + failures = n_requested` and that every AUC lies in `[0, 1]`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.records.len() + self.failures.len() != self.n_requested {
            return Err(format!(
                "{} records + {} failures != {} requested",
                self.records.len(),
                self.failures.len(),
                self.n_requested
            ));
        }
        for a in &self.aggregates {
            if a.name.starts_with("auc") && !(0.0..=1.0).contains(&a.value) {
                return Err(format!("{}/{} = {} outside [0, 1]", a.group, a.name, a.value));
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite")
    }
}

/// Output format for [`export`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(HarnessError::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Writes the full report as JSON, or the records as CSV (one row per record).
pub fn export(report: &ExperimentReport, format: Format, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Json => {
            w.write_all(report.to_json_string().as_bytes()).map_err(io_err(path))?;
            w.write_all(b"\n").map_err(io_err(path))?;
        }
        Format::Csv => write_records_csv(&report.records, &mut w, path)?,
    }
    w.flush().map_err(io_err(path))
}

/// CSV with header `sample,group,<keys...>`; keys are the sorted union over records.
pub fn write_records_csv<W: Write>(records: &[Record], w: W, path: &Path) -> Result<()> {
    let keys: BTreeSet<&str> = records.iter().flat_map(|r| r.values.keys().map(String::as_str)).collect();
    let csv_err = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["sample", "group"];
    header.extend(keys.iter().copied());
    wr.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.sample.to_string(), r.group.clone()];
        row.extend(keys.iter().map(|k| r.values.get(*k).map(|v| v.to_string()).unwrap_or_default()));
        wr.write_record(&row).map_err(csv_err)?;
    }
    wr.flush().map_err(io_err(path))
}

pub fn import_json(path: &Path) -> Result<ExperimentReport> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })
}

/// Reads records written by [`write_records_csv`].
pub fn import_records_csv(path: &Path) -> Result<Vec<Record>> {
    let csv_err = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let fmt_err = |msg: String| HarnessError::Format { path: path.to_path_buf(), msg };
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.len() < 2 || header[0] != "sample" || header[1] != "group" {
        return Err(fmt_err("header must start with `sample,group`".into()));
    }
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let sample = row[0].parse().map_err(|_| fmt_err(format!("row {}: bad sample index", line + 2)))?;
        let mut r = Record::new(sample, &row[1]);
        for (k, cell) in header.iter().zip(row.iter()).skip(2) {
            if !cell.is_empty() {
                let v: f64 = cell.parse().map_err(|_| fmt_err(format!("row {}: bad value `{cell}`", line + 2)))?;
                r.values.insert(k.clone(), v);
            }
        }
        out.push(r);
    }
    Ok(out)
}
