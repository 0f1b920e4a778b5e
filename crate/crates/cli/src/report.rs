use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use pvlab_core::report::ImpliedReport;

use crate::config::{config_hash, ExperimentConfig, SCHEMA_VERSION};

pub const TOOL: &str = "pvlab";

/// One CSV sweep row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub command: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub kt: Option<usize>,
    pub r: Option<usize>,
    pub quantity: String,
    pub value: f64,
    pub stderr: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_s: f64,
    pub results: Value,
    pub rows: Vec<Row>,
}

impl RunReport {
    /// Schema and consistency checks; `Ok` means the report can be trusted
    /// as a record of the run it describes.
    pub fn validate_json(text: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(text).context("report does not match the run-report schema")?;
        if r.schema_version != SCHEMA_VERSION {
            bail!("report schema_version {} is not supported (expected {SCHEMA_VERSION})", r.schema_version);
        }
        if r.tool != TOOL {
            bail!("report was written by {:?}, not {TOOL}", r.tool);
        }
        let cfg = ExperimentConfig::from_value(r.config.clone()).context("embedded config")?;
        if cfg.command != r.command || cfg.seed != r.seed {
            bail!("report header disagrees with its embedded config");
        }
        if config_hash(&r.config) != r.config_hash {
            bail!("config_hash does not match the embedded config");
        }
        if !(r.wall_time_s >= 0.0) {
            bail!("wall_time_s must be nonnegative");
        }
        for row in &r.rows {
            if row.command != r.command {
                bail!("row {:?} belongs to command {:?}", row.quantity, row.command);
            }
            if !row.value.is_finite() || !(row.stderr >= 0.0) {
                bail!("row {:?} has a non-finite value or negative stderr", row.quantity);
            }
        }
        if r.command == "report" {
            ImpliedReport::validate_json(&r.results.to_string()).context("implied-constant results")?;
        }
        Ok(r)
    }
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
