//! `pvlab`: experiment driver.
//!
//! ```text
//! pvlab run CONFIG [--set key=value]... [--output FILE] [--csv FILE] [--threads N]
//! pvlab validate-report FILE
//! pvlab commands
//! ```

mod commands;
mod config;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;

use config::{accepted_keys, apply_overrides, ExperimentConfig, COMMANDS, SCHEMA_VERSION};
use report::{write_csv, RunReport, TOOL};

#[derive(Parser)]
#[command(name = "pvlab", version, about = "Numerical experiments on the Rademacher routing game")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a JSON config.
    Run {
        config: PathBuf,
        /// Override a config key; the value is parsed as JSON when possible.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Report path; overrides the config's `output`. Stdout if neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        /// CSV rows path; overrides the config's `csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Worker threads when the config has no `threads` key (0 = auto).
        #[arg(long, env = "PVLAB_THREADS", default_value_t = 0)]
        threads: usize,
    },
    /// Check a run report against its schema.
    ValidateReport { report: PathBuf },
    /// List the commands and the keys each accepts.
    Commands,
}

fn run(config: PathBuf, overrides: Vec<String>, output: Option<PathBuf>, csv: Option<PathBuf>, threads: usize) -> Result<()> {
    let text = std::fs::read_to_string(&config).with_context(|| format!("cannot read {}", config.display()))?;
    let mut raw: Value = serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", config.display()))?;
    apply_overrides(&mut raw, &overrides)?;
    let cfg = ExperimentConfig::from_value(raw)?;
    let threads = cfg.threads.unwrap_or(threads);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot start the worker pool")?;

    let started = chrono::Utc::now();
    let clock = Instant::now();
    let out = commands::run(&cfg).with_context(|| format!("command `{}` failed", cfg.command))?;
    let wall = clock.elapsed().as_secs_f64();
    let finished = chrono::Utc::now();

    let rep = RunReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cfg.command.clone(),
        config_hash: cfg.hash(),
        config: cfg.raw.clone(),
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        started_at: started.to_rfc3339(),
        finished_at: finished.to_rfc3339(),
        wall_time_s: wall,
        results: out.results,
        rows: out.rows,
    };
    let json = serde_json::to_string_pretty(&rep)?;
    RunReport::validate_json(&json).context("the report failed its own validation")?;
    match output.or(cfg.output) {
        Some(path) => {
            std::fs::write(&path, &json).with_context(|| format!("cannot write {}", path.display()))?;
            let back = std::fs::read_to_string(&path)?;
            RunReport::validate_json(&back).with_context(|| format!("{} did not read back", path.display()))?;
            eprintln!("{}: {} rows, {wall:.2}s -> {}", rep.command, rep.rows.len(), path.display());
        }
        None => println!("{json}"),
    }
    if let Some(path) = csv.or(cfg.csv) {
        write_csv(&path, &rep.rows)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run {
            config,
            overrides,
            output,
            csv,
            threads,
        } => run(config, overrides, output, csv, threads),
        Cmd::ValidateReport { report } => std::fs::read_to_string(&report)
            .with_context(|| format!("cannot read {}", report.display()))
            .and_then(|t| RunReport::validate_json(&t))
            .map(|r| println!("ok: {} report, {} rows, config {}", r.command, r.rows.len(), r.config_hash)),
        Cmd::Commands => {
            let mut out = std::io::stdout().lock();
            COMMANDS
                .iter()
                .try_for_each(|c| writeln!(out, "{c}: {}", accepted_keys(c).unwrap_or_default().join(", ")))
                .or_else(|e| if e.kind() == std::io::ErrorKind::BrokenPipe { Ok(()) } else { Err(e.into()) })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
