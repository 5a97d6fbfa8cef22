//! Command-line front end.
//!
//! Each run is keyed by a SHA-256 over its subcommand, flags, seed and the
//! library version. The key names three files in the output directory:
//! `<key>.manifest.json` (flags, timestamps, paths), `<key>.report.json`
//! (the deterministic payload) and any artifacts as `<key>.<suffix>`.

mod commands;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use commands::Command;

/// Bumped whenever the report layout changes.
pub const SCHEMA_VERSION: u32 = 1;
/// Caps the worker threads used by data-parallel loops.
pub const THREADS_ENV: &str = "RELU_FORGE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "relu-forge",
    version,
    about = "Explicit deep ReLU constructions and the experiments around them"
)]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print the report as JSON instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory receiving manifests, reports and artifacts.
    #[arg(long, global = true, default_value = "relu-forge-runs")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

/// One verified invariant.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub limit: Option<f64>,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value: Some(value),
            limit: Some(limit),
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= limit,
            value: Some(value),
            limit: Some(limit),
        }
    }

    fn holds(name: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            passed,
            value: None,
            limit: None,
        }
    }

    fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        match (self.value, self.limit) {
            (Some(v), Some(l)) => format!("{verdict}  {:<28} {v:.6e} (limit {l:.6e})", self.name),
            _ => format!("{verdict}  {}", self.name),
        }
    }
}

/// What a subcommand hands back for persisting and printing.
#[derive(Debug, Default)]
pub struct Outcome {
    pub result: Value,
    pub checks: Vec<Check>,
    /// `(suffix, contents)` pairs written next to the report.
    pub artifacts: Vec<(String, String)>,
    pub table: Vec<String>,
}

/// Files written by a completed run.
#[derive(Clone, Debug)]
pub struct RunFiles {
    pub key: String,
    pub manifest: PathBuf,
    pub report: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub passed: bool,
    pub report_text: String,
}

fn run_key(cli: &Cli) -> (String, Value) {
    let flags = serde_json::to_value(&cli.command).unwrap_or(Value::Null);
    let keyed = json!({
        "subcommand": cli.command.name(),
        "flags": flags,
        "seed": cli.seed,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let digest = Sha256::digest(keyed.to_string().as_bytes());
    let key = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    (key, flags)
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |t| t.as_secs_f64())
}

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

/// Runs the parsed command and persists its manifest, report and artifacts.
pub fn execute(cli: &Cli) -> Result<RunFiles> {
    let started = unix_now();
    let (key, flags) = run_key(cli);
    let outcome = cli.command.run(cli.seed)?;
    fs::create_dir_all(&cli.out)?;
    let mut artifacts = Vec::with_capacity(outcome.artifacts.len());
    for (suffix, contents) in &outcome.artifacts {
        let path = cli.out.join(format!("{key}.{suffix}"));
        fs::write(&path, contents)?;
        artifacts.push(path);
    }
    let passed = outcome.checks.iter().all(|c| c.passed);
    let report_text = to_pretty(&json!({
        "schema_version": SCHEMA_VERSION,
        "subcommand": cli.command.name(),
        "seed": cli.seed,
        "passed": passed,
        "checks": outcome.checks,
        "result": outcome.result,
    }));
    let report = cli.out.join(format!("{key}.report.json"));
    fs::write(&report, &report_text)?;
    let manifest = cli.out.join(format!("{key}.manifest.json"));
    let manifest_text = to_pretty(&json!({
        "schema_version": SCHEMA_VERSION,
        "key": key,
        "subcommand": cli.command.name(),
        "flags": flags,
        "seed": cli.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started,
        "finished_unix": unix_now(),
        "report": report,
        "artifacts": artifacts,
    }));
    fs::write(&manifest, manifest_text)?;

    if cli.json {
        print!("{report_text}");
    } else {
        for line in &outcome.table {
            println!("{line}");
        }
        if !outcome.table.is_empty() {
            println!();
        }
        for c in &outcome.checks {
            println!("{}", c.line());
        }
        println!("report: {}", report.display());
    }
    for c in outcome.checks.iter().filter(|c| !c.passed) {
        eprintln!("invariant failed: {}", c.name);
    }
    Ok(RunFiles {
        key,
        manifest,
        report,
        artifacts,
        passed,
        report_text,
    })
}

fn configure_threads() {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            // fails only if a pool already exists, in which case it stays
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        _ => eprintln!("warning: ignoring {THREADS_ENV}={raw:?}; expected a positive integer"),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_INVARIANT,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::InvalidSubcommand => EXIT_USAGE,
                _ => EXIT_FAILURE,
            };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(files) if files.passed => EXIT_OK,
        Ok(_) => EXIT_INVARIANT,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> ! {
    std::process::exit(run(std::env::args_os()))
}
