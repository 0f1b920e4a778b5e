use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn pvlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvlab"))
        .args(args)
        .env_remove("PVLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

/// Runs a config and returns the parsed report.
fn run(cfg: Value, extra: &[&str]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "cfg.json", &cfg);
    let out_path = dir.path().join("report.json");
    let mut args = vec!["run", path.to_str().unwrap(), "--output", out_path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = pvlab(&args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let validated = pvlab(&["validate-report", out_path.to_str().unwrap()]);
    assert!(validated.status.success(), "{}", String::from_utf8_lossy(&validated.stderr));
    serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap()
}

#[test]
fn honest_value_is_one() {
    let r = run(json!({"schema_version": 1, "command": "honest", "n": 3}), &[]);
    assert!((r["results"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["tool"], "pvlab");
}

#[test]
fn eval_do_nothing() {
    let r = run(
        json!({"schema_version": 1, "command": "eval", "strategy": "do_nothing", "n": 2, "mode": "exact"}),
        &[],
    );
    assert!((r["results"]["value"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn type2_l1_witness() {
    let r = run(json!({"schema_version": 1, "command": "type2", "space": "l1", "dim": 4, "m": 4}), &[]);
    assert!(r["results"]["type2"]["lower"].as_f64().unwrap() >= 1.999);
}

#[test]
fn overrides_feed_sweeps_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let r = run(
        json!({"schema_version": 1, "command": "eval", "strategy": "do_nothing", "n": 2}),
        &["--set", "n=3", "--set", "kt=9", "--csv", csv.to_str().unwrap()],
    );
    assert!((r["results"]["value"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-12);
    assert_eq!(r["config"]["n"], 3);
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("command,n,k,kt,r,quantity,value,stderr,seed"));
    assert!(lines.next().unwrap().starts_with("eval,3,1,9,1,value,"));
}

#[test]
fn seeded_monte_carlo_is_reproducible() {
    let cfg = json!({"schema_version": 1, "command": "eval", "strategy": "random", "n": 2, "kt": 4, "r": 2,
                     "mode": "mc", "samples": 2000, "seed": 9});
    let a = run(cfg.clone(), &[]);
    let b = run(cfg, &["--threads", "2"]);
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["config_hash"], b["config_hash"]);
}

#[test]
fn unknown_and_misplaced_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    for (cfg, needle) in [
        (json!({"schema_version": 1, "command": "honest", "n": 3, "colour": 1}), "`colour`"),
        (json!({"schema_version": 1, "command": "honest", "n": 3, "variant": "i"}), "`variant`"),
        (json!({"schema_version": 1, "command": "honest", "n": -3}), "`n`"),
        (json!({"command": "honest", "n": 3}), "`schema_version`"),
    ] {
        let path = write_config(dir.path(), "bad.json", &cfg);
        let out = pvlab(&["run", path.to_str().unwrap()]);
        assert!(!out.status.success());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{err}");
    }
}

#[test]
fn numerical_failure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "cfg.json",
        &json!({"schema_version": 1, "command": "eval", "strategy": "do_nothing", "n": 2, "kt": 2}),
    );
    let out = pvlab(&["run", path.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn seesaw_writes_strategy_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let strat = dir.path().join("best.json");
    let trace = dir.path().join("trace.csv");
    let r = run(
        json!({"schema_version": 1, "command": "seesaw", "n": 2, "k": 1, "kt": 4, "r": 2, "restarts": 2,
               "max_iters": 20, "warm_start": "column_majority", "seed": 3,
               "save_strategy": strat.to_str().unwrap(), "trace_csv": trace.to_str().unwrap()}),
        &[],
    );
    let best = r["results"]["best_value"].as_f64().unwrap();
    assert!(best >= 0.375);
    let ev = run(json!({"schema_version": 1, "command": "eval", "strategy_file": strat.to_str().unwrap()}), &[]);
    assert!((ev["results"]["value"].as_f64().unwrap() - best).abs() < 1e-9);
    assert!(std::fs::read_to_string(trace).unwrap().starts_with("restart,iter,value"));
}

#[test]
fn implied_report_validates() {
    let r = run(
        json!({"schema_version": 1, "command": "report", "ns": [2], "seesaw_iters": 5,
               "norm_restarts": 1, "norm_iters": 20, "r_max": 1}),
        &[],
    );
    assert_eq!(r["results"]["schema_version"], 1);
    assert_eq!(r["results"]["entries"].as_array().unwrap().len(), 5);
}

#[test]
fn norm_and_mean_commands() {
    let r = run(
        json!({"schema_version": 1, "command": "norm", "space": "trace", "rows": 2, "element": [3.0, 0.0, 0.0, -4.0]}),
        &[],
    );
    assert!((r["results"]["norm"]["value"].as_f64().unwrap() - 7.0).abs() < 1e-12);
    let r = run(json!({"schema_version": 1, "command": "radnorm", "space": "operator", "rows": 2}), &[]);
    let want = (2.0 + 2f64.sqrt()) / 2.0;
    assert!((r["results"]["mean"]["mean"].as_f64().unwrap() - want).abs() < 1e-12);
    let r = run(
        json!({"schema_version": 1, "command": "gaussnorm", "space": "l2", "dim": 8, "samples": 200}),
        &[],
    );
    assert!(r["results"]["mean"]["mean"].as_f64().unwrap() > 2.0);
}

#[test]
fn tampered_report_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = run(json!({"schema_version": 1, "command": "honest", "n": 2}), &[]);
    r["config"]["n"] = json!(4);
    let path = dir.path().join("tampered.json");
    std::fs::write(&path, r.to_string()).unwrap();
    assert!(!pvlab(&["validate-report", path.to_str().unwrap()]).status.success());
}
