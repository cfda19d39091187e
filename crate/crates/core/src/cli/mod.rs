//! Command-line front end. Exit codes: 0 success, 1 bad configuration or
//! usage, 2 season too short, 3 invadable resident, 4 numerical failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{
    CertifyConfig, Initial, OracleConfig, PopsimConfig, ReduceConfig, RunConfig, SynthesizeConfig, Target,
};

use crate::error::Error;
use crate::population::PopulationMode;
use crate::synthesis::FieldKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SEASON_TOO_SHORT: i32 = 2;
pub const EXIT_INVADABLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "seasonal", version, about = "Feeding strategies for a seasonal consumer-resource model")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Base random seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override a configuration value, e.g. `--set params.T=0.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boundary, singular arc and tributaries of a strategy field.
    Synthesize {
        #[arg(long, default_value = "ess")]
        kind: FieldKind,
    },
    /// Best-response search against a resident field; exit 3 when invadable.
    Certify {
        #[arg(long, default_value = "ess")]
        kind: FieldKind,
    },
    /// One season under a field, or under a constant control.
    Simulate {
        #[arg(long, default_value = "ess")]
        kind: FieldKind,
        /// Constant open-loop control instead of the field.
        #[arg(long)]
        control: Option<f64>,
    },
    /// Dynamic-programming value grid of the reduced problem.
    Oracle {
        /// Compare the grid with a field's rollout values and boundary.
        #[arg(long)]
        compare: bool,
        #[arg(long, default_value = "coop")]
        kind: FieldKind,
    },
    /// Homogeneity and reduction checks on the model.
    Reduce {
        /// Exit 4 when any check fails.
        #[arg(long)]
        check: bool,
        /// Also compare full and reduced value grids.
        #[arg(long)]
        grids: bool,
    },
    /// Monte Carlo population of individual feeders and layers.
    Popsim {
        #[arg(long)]
        mode: Option<PopulationMode>,
        /// Halve the interval from `T/100` and average over seeds.
        #[arg(long)]
        sweep: bool,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::InvalidParams { .. } => EXIT_CONFIG,
        Error::SeasonTooShort { .. } => EXIT_SEASON_TOO_SHORT,
        _ => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr, summaries to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut cfg = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| commands::dispatch(&cli.command, &cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
