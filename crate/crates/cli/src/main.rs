//! `lte`: estimate long-term counterfactual means from a trial plus an
//! observational sample, diagnose positivity, and run simulation presets.
//!
//! Exit status: 0 on success, 2 when the input or configuration is invalid,
//! 3 when estimation fails.

mod commands;
mod config;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lte_core::{EstimatorKind, ObservabilityMode};

use config::{Models, RunConfig, Variance};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Estimation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }
}

impl From<lte_core::Error> for CliError {
    fn from(e: lte_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Estimation(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lte", version, about = "Long-term treatment effects from a trial and an observational sample")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate E(Y^a | S=0) from a data file.
    Estimate(Flags),
    /// Run a Monte Carlo preset and write per-estimator metrics as CSV.
    Simulate(Flags),
    /// Fit nuisance models and report positivity diagnostics.
    Diagnose(Flags),
}

/// Flags; each one mirrors the config key of the same name.
#[derive(Debug, Args)]
struct Flags {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV data file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Observability mode of the data.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ObservabilityMode>,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<EstimatorKind>,
    /// Treatment level label as it appears in the data.
    #[arg(long)]
    treatment_level: Option<String>,
    #[arg(long, value_enum)]
    variance: Option<Variance>,
    /// Bootstrap replicates [default: 500].
    #[arg(long)]
    boot_reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Nuisance model family.
    #[arg(long, value_enum)]
    models: Option<Models>,
    /// Probability below which a positivity check is flagged [default: 0.01].
    #[arg(long)]
    positivity_eps: Option<f64>,
    /// Simulation preset (table2, table3, smoke, pooled).
    #[arg(long)]
    preset: Option<String>,
    /// Replicates per simulation cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Cohort draws for the simulation truth.
    #[arg(long)]
    oracle_size: Option<usize>,
}

fn parse_mode(s: &str) -> Result<ObservabilityMode, String> {
    s.parse().map_err(|e: lte_core::Error| e.to_string())
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: lte_core::Error| e.to_string())
}

impl Flags {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            data: self.data,
            mode: self.mode,
            columns: Vec::new(),
            estimator: self.estimator,
            treatment_level: self.treatment_level,
            variance: self.variance,
            boot_reps: self.boot_reps,
            seed: self.seed,
            out: self.out,
            threads: self.threads,
            models: self.models,
            nuisance: None,
            positivity_eps: self.positivity_eps,
            preset: self.preset,
            reps: self.reps,
            oracle_size: self.oracle_size,
        };
        Ok(base.merge(flags))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = match cli.command {
        Command::Estimate(f) => ("estimate", f),
        Command::Simulate(f) => ("simulate", f),
        Command::Diagnose(f) => ("diagnose", f),
    };
    let cfg = flags.resolve()?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure thread pool: {e}")))?;
    }
    match name {
        "estimate" => commands::estimate(&cfg),
        "simulate" => commands::simulate(&cfg),
        _ => commands::diagnose(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.exit_code() == 2 { "invalid input" } else { "estimation failed" };
            eprintln!("error ({kind}): {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
