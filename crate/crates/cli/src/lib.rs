//! Experiment runner for the `relaxgrad` estimators: toy problems, the
//! bias/variance harness, multi-chain max-clique search and parameter
//! sweeps, all writing CSV.

pub mod commands;
pub mod config;
pub mod plot;

use clap::{Parser, Subcommand};

pub use config::{Command, ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] relaxgrad::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Run(relaxgrad::Error::InvalidInput(_)) => 2,
            _ => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "relaxgrad", version, about = "Gradient-estimator experiments over discrete variables", after_help = config::KEYS_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(clap::Args, Debug)]
pub struct CommonArgs {
    /// JSON file with configuration keys; flags override it.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Minimize the one-variable binary toy (z − 0.45)² or its negation.
    #[command(after_help = config::KEYS_HELP)]
    ToyBinary(CommonArgs),
    /// Minimize the ten-way categorical toy.
    #[command(after_help = config::KEYS_HELP)]
    ToyCategorical(CommonArgs),
    /// Empirical bias and variance of estimators over a grid of logits.
    #[command(after_help = config::KEYS_HELP)]
    Bias(CommonArgs),
    /// Multi-chain max-clique search on a DIMACS or planted graph.
    #[command(name = "maxclique", after_help = config::KEYS_HELP)]
    MaxClique(CommonArgs),
    /// Final outcomes over a kappa or beta grid.
    #[command(after_help = config::KEYS_HELP)]
    Sweep(CommonArgs),
}

impl Sub {
    pub fn split(self) -> (Command, CommonArgs) {
        match self {
            Sub::ToyBinary(a) => (Command::ToyBinary, a),
            Sub::ToyCategorical(a) => (Command::ToyCategorical, a),
            Sub::Bias(a) => (Command::Bias, a),
            Sub::MaxClique(a) => (Command::MaxClique, a),
            Sub::Sweep(a) => (Command::Sweep, a),
        }
    }
}

/// Resolves the configuration and runs the command, returning its summary lines.
pub fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    let (command, args) = cli.command.split();
    let base = match &args.config {
        Some(path) => Overrides::from_json_file(path)?,
        None => Overrides::default(),
    };
    let config = ExperimentConfig::resolve(command, base.merged_with(args.overrides))?;
    commands::run(&config)
}
