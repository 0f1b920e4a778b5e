//! Run configuration: one flat JSON object per run.
//!
//! The common keys (`schema_version`, `command`, `seed`, `threads`,
//! `output`, `csv`) are shared by every command; all other keys are
//! command parameters. Each command accepts only the keys listed in
//! [`accepted_keys`], and every value is type-checked.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use pvlab_core::hypercube::PhiVariant;

pub const SCHEMA_VERSION: u32 = 1;

pub const COMMANDS: [&str; 12] = [
    "honest", "eval", "zoo", "sigma", "pisier", "gap", "norm", "type2", "radnorm", "gaussnorm", "seesaw", "report",
];

const COMMON: [&str; 6] = ["schema_version", "command", "seed", "threads", "output", "csv"];
const STRATEGY: [&str; 7] = ["n", "k", "kt", "r", "strategy", "strategy_file", "strategy_seed"];
const BUDGET: [&str; 3] = ["norm_restarts", "norm_iters", "r_max"];
const MODE: [&str; 2] = ["mode", "samples"];
const SPACE: [&str; 7] = ["space", "dim", "rows", "cols", "n", "kt", "state_dim"];

pub fn accepted_keys(command: &str) -> Option<Vec<&'static str>> {
    let mut keys: Vec<&'static str> = match command {
        "honest" => vec!["n"],
        "eval" => [&STRATEGY[..], &MODE, &["save_strategy"]].concat(),
        "zoo" => [&["n", "k", "kt", "r", "strategy_seed"][..], &MODE].concat(),
        "sigma" | "pisier" => [&STRATEGY[..], &MODE, &BUDGET, &["variant"]].concat(),
        "gap" => [&STRATEGY[..], &MODE, &BUDGET].concat(),
        "norm" => [&SPACE[..], &BUDGET, &["element", "element_im"]].concat(),
        "type2" => [&SPACE[..], &MODE, &BUDGET, &["m"]].concat(),
        "radnorm" => [&SPACE[..], &MODE, &BUDGET].concat(),
        "gaussnorm" => [&SPACE[..], &BUDGET, &["samples"]].concat(),
        "seesaw" => vec![
            "n",
            "k",
            "kt",
            "r",
            "restarts",
            "max_iters",
            "tol",
            "mode",
            "samples",
            "schedule",
            "warm_start",
            "save_strategy",
            "trace_csv",
        ],
        "report" => [
            &["ns", "k", "kt", "r", "include_seesaw", "seesaw_restarts", "seesaw_iters", "sigma_ii_mode", "sigma_ii_samples"][..],
            &MODE,
            &BUDGET,
        ]
        .concat(),
        _ => return None,
    };
    keys.sort_unstable();
    keys.dedup();
    Some(keys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Exact,
    Mc,
}

/// Real entries, or `[re, im]` pairs.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Entries {
    Real(Vec<f64>),
    Complex(Vec<[f64; 2]>),
}

/// Every command parameter. Which ones a command may set is decided by
/// [`accepted_keys`].
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub kt: Option<usize>,
    pub r: Option<usize>,
    pub strategy: Option<String>,
    pub strategy_file: Option<PathBuf>,
    pub strategy_seed: Option<u64>,
    pub save_strategy: Option<PathBuf>,
    pub mode: Option<ModeName>,
    pub samples: Option<usize>,
    pub norm_restarts: Option<usize>,
    pub norm_iters: Option<usize>,
    pub r_max: Option<usize>,
    pub variant: Option<PhiVariant>,
    pub space: Option<String>,
    pub dim: Option<usize>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub state_dim: Option<usize>,
    pub element: Option<Entries>,
    pub element_im: Option<Vec<f64>>,
    pub m: Option<usize>,
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub schedule: Option<Vec<String>>,
    pub warm_start: Option<String>,
    pub trace_csv: Option<PathBuf>,
    pub ns: Option<Vec<usize>>,
    pub include_seesaw: Option<bool>,
    pub seesaw_restarts: Option<usize>,
    pub seesaw_iters: Option<usize>,
    pub sigma_ii_mode: Option<ModeName>,
    pub sigma_ii_samples: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub params: Params,
    /// The validated object, as echoed into the report.
    pub raw: Value,
}

fn field<T: serde::de::DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    obj.get(key)
        .map(|v| serde_json::from_value(v.clone()).with_context(|| format!("config field `{key}`")))
        .transpose()
}

impl ExperimentConfig {
    pub fn from_value(raw: Value) -> Result<Self> {
        let obj = raw.as_object().ok_or_else(|| anyhow!("config must be a JSON object"))?;
        let version: u32 = field(obj, "schema_version")?.ok_or_else(|| anyhow!("config field `schema_version` is missing"))?;
        if version != SCHEMA_VERSION {
            bail!("config field `schema_version`: {version} is not supported (expected {SCHEMA_VERSION})");
        }
        let command: String = field(obj, "command")?.ok_or_else(|| anyhow!("config field `command` is missing"))?;
        let accepted = accepted_keys(&command)
            .ok_or_else(|| anyhow!("config field `command`: unknown command {command:?} (expected one of {})", COMMANDS.join(", ")))?;
        let mut params = Map::new();
        for (key, value) in obj {
            if COMMON.contains(&key.as_str()) {
                continue;
            }
            if !accepted.contains(&key.as_str()) {
                bail!(
                    "config field `{key}` is not accepted by command `{command}` (accepted: {})",
                    accepted.join(", ")
                );
            }
            let single = Map::from_iter([(key.clone(), value.clone())]);
            serde_json::from_value::<Params>(Value::Object(single)).with_context(|| format!("config field `{key}`"))?;
            params.insert(key.clone(), value.clone());
        }
        let params: Params = serde_json::from_value(Value::Object(params)).context("config parameters")?;
        Ok(Self {
            seed: field(obj, "seed")?.unwrap_or(0),
            threads: field(obj, "threads")?,
            output: field(obj, "output")?,
            csv: field(obj, "csv")?,
            command,
            params,
            raw,
        })
    }

    /// SHA-256 of the compact config with sorted keys.
    pub fn hash(&self) -> String {
        config_hash(&self.raw)
    }
}

pub fn config_hash(raw: &Value) -> String {
    let text = serde_json::to_string(raw).expect("JSON values serialize");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// Applies `key=value` overrides. Values are parsed as JSON when possible
/// and kept as strings otherwise.
pub fn apply_overrides(raw: &mut Value, overrides: &[String]) -> Result<()> {
    let obj = raw.as_object_mut().ok_or_else(|| anyhow!("config must be a JSON object"))?;
    for ov in overrides {
        let (key, value) = ov
            .split_once('=')
            .ok_or_else(|| anyhow!("override {ov:?} is not of the form key=value"))?;
        let key = key.trim();
        if key.is_empty() {
            bail!("override {ov:?} has an empty key");
        }
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        obj.insert(key.to_string(), value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Value) -> Result<ExperimentConfig> {
        ExperimentConfig::from_value(v)
    }

    #[test]
    fn accepts_minimal_config() {
        let c = parse(json!({"schema_version": 1, "command": "honest", "n": 3})).unwrap();
        assert_eq!(c.params.n, Some(3));
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        let e = parse(json!({"schema_version": 1, "command": "honest", "n": 3, "nn": 1})).unwrap_err();
        assert!(format!("{e:#}").contains("`nn`"));
        let e = parse(json!({"schema_version": 1, "command": "honest", "variant": "i"})).unwrap_err();
        assert!(format!("{e:#}").contains("`variant`"));
        let e = parse(json!({"schema_version": 1, "command": "eval", "n": "two"})).unwrap_err();
        assert!(format!("{e:#}").contains("invalid type"));
        assert!(parse(json!({"schema_version": 2, "command": "honest"})).is_err());
        assert!(parse(json!({"schema_version": 1, "command": "nope"})).is_err());
    }

    #[test]
    fn every_command_has_a_key_list() {
        for c in COMMANDS {
            assert!(accepted_keys(c).is_some(), "{c}");
        }
    }

    #[test]
    fn overrides_parse_json_then_strings() {
        let mut v = json!({"schema_version": 1, "command": "eval"});
        apply_overrides(&mut v, &["n=3".into(), "strategy=do_nothing".into(), "mode=\"mc\"".into()]).unwrap();
        assert_eq!(v["n"], json!(3));
        assert_eq!(v["strategy"], json!("do_nothing"));
        assert_eq!(v["mode"], json!("mc"));
        assert!(apply_overrides(&mut v, &["novalue".into()]).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"command":"honest","n":2,"schema_version":1}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"n":2,"schema_version":1,"command":"honest"}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
