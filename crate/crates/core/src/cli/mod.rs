//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors (bad
//! config, unreadable or malformed input files), 1 for anything else.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::{
    cmd_baseline, cmd_evaluate_long, cmd_evaluate_short, cmd_ingest, cmd_report, cmd_synth, load, Loaded,
    RunContext,
};
pub use config::{IngestConfig, LongSection, Protocol, ReportSection, RunConfig, ShortSection};

use crate::data::PmFraction;
use crate::fusion::FusionKind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("{0}")]
    Protocol(String),
}

impl CliError {
    pub(crate) fn input(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub(crate) fn output(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input { .. } => 2,
            CliError::Output { .. } | CliError::Protocol(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FractionArg {
    Pm25,
    Pm10,
}

impl From<FractionArg> for PmFraction {
    fn from(f: FractionArg) -> Self {
        match f {
            FractionArg::Pm25 => PmFraction::Pm25,
            FractionArg::Pm10 => PmFraction::Pm10,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FusionArg {
    Aggregate,
    Median,
}

impl From<FusionArg> for FusionKind {
    fn from(f: FusionArg) -> Self {
        match f {
            FusionArg::Aggregate => FusionKind::Aggregate,
            FusionArg::Median => FusionKind::Median,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fleetcal", version, about = "Global calibration of low-cost PM sensor fleets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run config (TOML, or JSON by extension); for `synth`, the fleet spec.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub fraction: Option<FractionArg>,
    #[arg(long, global = true, value_enum)]
    pub fusion: Option<FusionArg>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Align device files with the reference and characterize the dataset.
    Ingest,
    /// Generate a synthetic fleet from a fleet spec.
    Synth,
    /// Short-term protocol: global versus ad-hoc on held-out weeks.
    EvaluateShort,
    /// Long-term protocol: all device combinations, cross-season testing.
    EvaluateLong,
    /// Vendor calibration performance.
    Baseline,
    /// Every selected protocol plus the baseline.
    Report,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    if let Command::Synth = cli.command {
        let out = cli
            .out
            .clone()
            .ok_or_else(|| CliError::Config("synth needs --out".into()))?;
        return cmd_synth(&config, cli.seed, &out);
    }
    let mut ctx = RunContext::new(&config, cli.seed, cli.out.clone())?;
    if let Some(f) = cli.fraction {
        commands::override_fraction(&mut ctx, f.into());
    }
    if let Some(f) = cli.fusion {
        commands::override_fusion(&mut ctx, f.into());
    }
    match cli.command {
        Command::Ingest => cmd_ingest(&ctx),
        Command::Synth => unreachable!("handled above"),
        Command::EvaluateShort => cmd_evaluate_short(&ctx),
        Command::EvaluateLong => cmd_evaluate_long(&ctx),
        Command::Baseline => cmd_baseline(&ctx),
        Command::Report => cmd_report(&ctx),
    }
}

/// Parses `args`, runs on a pool of `--jobs` threads and returns the exit
/// code. Errors are printed to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
