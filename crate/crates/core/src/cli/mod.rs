//! Experiment runner: config parsing, orchestration and result comparison.
//!
//! Exit codes: 0 success, 1 compare found differences (or a runtime failure),
//! 2 config or schema error, 3 an estimator reported insufficient data.

mod compare;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use compare::{compare, parse_results, FieldDiff, FieldTolerance, ToleranceSpec};
pub use config::{
    config_hash, ConeConfig, ExperimentConfig, ExperimentKind, LambdaChoice, Lemma5Config, OracleConfig, RenewalConfig,
    ScanConfig, SlabConfig, ZeroOneConfig, SCHEMA,
};
pub use run::{execute, results_bytes, run, Curves, Report, RunManifest, RunOptions, RunStatus, CURVES_FILE, MANIFEST_FILE, RESULTS_FILE};

use crate::error::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_DIFF: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INSUFFICIENT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "rwre-lab", version, about = "Random walks in random environments: simulation, renewals, oracles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; defaults to the hardware count.
        #[arg(long, env = "RWRE_LAB_THREADS")]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides master_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two results.jsonl files field by field.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// TOML tolerance spec (default_abs, ignore, [fields]).
        #[arg(long)]
        tolerance: Option<PathBuf>,
        /// Overrides default_abs.
        #[arg(long)]
        abs: Option<f64>,
    },
    /// Print the JSON schema of config files.
    Schema,
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_DIFF,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> ExitCode {
    let code = match cli.command {
        Command::Schema => {
            println!("{SCHEMA}");
            EXIT_OK
        }
        Command::Run { config, threads, out, seed } => {
            let threads = threads
                .filter(|&n| n > 0)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            match run(&RunOptions { config, out, seed, threads }) {
                Ok((RunStatus::Ok, dir)) => {
                    eprintln!("results written to {}", dir.display());
                    EXIT_OK
                }
                Ok((RunStatus::InsufficientData, dir)) => {
                    eprintln!("results written to {}; some estimators reported insufficient data", dir.display());
                    EXIT_INSUFFICIENT
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            }
        }
        Command::Compare { a, b, tolerance, abs } => match compare_files(&a, &b, tolerance.as_deref(), abs) {
            Ok(diffs) => {
                for d in &diffs {
                    println!("{}", serde_json::to_string(d).unwrap_or_default());
                }
                eprintln!("{} field(s) out of tolerance", diffs.len());
                if diffs.is_empty() {
                    EXIT_OK
                } else {
                    EXIT_DIFF
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
    };
    ExitCode::from(code)
}

fn compare_files(a: &std::path::Path, b: &std::path::Path, tol: Option<&std::path::Path>, abs: Option<f64>) -> crate::Result<Vec<FieldDiff>> {
    let read = |p: &std::path::Path| std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())));
    let mut spec = match tol {
        Some(p) => ToleranceSpec::from_toml(&read(p)?)?,
        None => ToleranceSpec::default(),
    };
    if let Some(t) = abs {
        spec.default_abs = t;
    }
    compare(&parse_results(&read(a)?)?, &parse_results(&read(b)?)?, &spec)
}
