//! Command-line experiment runner for `dysonlab`.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for
//! configuration or output errors, 3 for numerical failures.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::Outcome;
use config::{Config, ConfigError};
use output::Format;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dysonlab", version, about = "GUE kernels, tail conditions and Dyson SDE experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat TOML file of parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Parameter override `key=value`; repeatable, applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Base random seed (overrides the `seed` key).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; falls back to DYSONLAB_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "dysonlab-out")]
    pub out: PathBuf,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,

    /// Store wall-clock time in the metadata (output is then not reproducible).
    #[arg(long, global = true)]
    pub record_timing: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Bulk-scaled GUE kernel against the sine kernel on a grid.
    KernelTable,
    /// Tail-condition table with the principal-value check.
    Conditions,
    /// Paired Dyson SDE ensembles with and without the macro drift.
    Simulate,
    /// GUE eigenvalue samples, semicircle KS and one-point density.
    Sample,
    /// Principal-value semicircle identity over a list of theta.
    PvCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::KernelTable => "kernel-table",
            Command::Conditions => "conditions",
            Command::Simulate => "simulate",
            Command::Sample => "sample",
            Command::PvCheck => "pv-check",
        }
    }
}

enum Prepared {
    KernelTable(commands::KernelTableParams),
    Conditions(commands::ConditionsParams),
    Simulate(commands::SimulateParams),
    Sample(commands::SampleParams),
    Pv(commands::PvParams),
}

fn prepare(cmd: Command, cfg: &Config) -> Result<Prepared, ConfigError> {
    Ok(match cmd {
        Command::KernelTable => Prepared::KernelTable(commands::prepare_kernel_table(cfg)?),
        Command::Conditions => Prepared::Conditions(commands::prepare_conditions(cfg)?),
        Command::Simulate => Prepared::Simulate(commands::prepare_simulate(cfg)?),
        Command::Sample => Prepared::Sample(commands::prepare_sample(cfg)?),
        Command::PvCheck => Prepared::Pv(commands::prepare_pv(cfg)?),
    })
}

fn execute(p: &Prepared) -> dysonlab::Result<Outcome> {
    match p {
        Prepared::KernelTable(p) => commands::run_kernel_table(p),
        Prepared::Conditions(p) => commands::run_conditions(p),
        Prepared::Simulate(p) => commands::run_simulate(p),
        Prepared::Sample(p) => commands::run_sample(p),
        Prepared::Pv(p) => commands::run_pv(p),
    }
}

fn build_config(cli: &Cli) -> Result<Config, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.apply_set(s)?;
    }
    if let Some(seed) = cli.seed {
        let v = i64::try_from(seed).map_err(|_| ConfigError("--seed must be below 2^63".into()))?;
        cfg.set_flag("seed", toml::Value::Integer(v));
    }
    Ok(cfg)
}

fn thread_count(cli: &Cli) -> Result<Option<usize>, ConfigError> {
    let n = match cli.threads {
        Some(n) => Some(n),
        None => match std::env::var("DYSONLAB_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| ConfigError(format!("DYSONLAB_THREADS=`{v}` is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(ConfigError("thread count must be positive".into()));
    }
    Ok(n)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let fail_config = |e: ConfigError| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    };
    let cfg = match build_config(cli) {
        Ok(c) => c,
        Err(e) => return fail_config(e),
    };
    let prepared = match prepare(cli.command, &cfg) {
        Ok(p) => p,
        Err(e) => return fail_config(e),
    };
    let threads = match thread_count(cli) {
        Ok(t) => t,
        Err(e) => return fail_config(e),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return fail_config(ConfigError(format!("cannot start worker pool: {e}"))),
    };

    let start = Instant::now();
    let mut outcome = match pool.install(|| execute(&prepared)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return if e.is_numeric() { EXIT_NUMERIC } else { EXIT_CONFIG };
        }
    };
    outcome.metadata.insert("command".into(), json!(cli.command.name()));
    outcome.metadata.insert("config".into(), cfg.echo());
    outcome.metadata.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    if cli.record_timing {
        outcome.metadata.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
    }

    match output::write(&outcome, &cli.out, cli.format) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: writing output: {e}");
            return EXIT_CONFIG;
        }
    }
    for c in &outcome.checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if outcome.all_passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}
