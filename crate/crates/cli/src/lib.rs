//! Command-line experiment harness for the `predmarket` simulator.
//!
//! Every command writes CSV tables, a `config.json` echo of the resolved
//! settings, a `schema.md` describing the tables and, unless disabled, SVG
//! plots into one output directory.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod output;
pub mod plot;
pub mod presets;
pub mod scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<predmarket::Error> for CliError {
    fn from(e: predmarket::Error) -> Self {
        match e {
            predmarket::Error::InvalidConfig { .. } | predmarket::Error::UnknownParameter(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "predmarket",
    version,
    about = "Prediction-market simulation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Master seed; overrides the scenario's `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replications per configuration.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Skip SVG output.
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a JSON scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep each bettor attribute over its grid (MSE and dominant lag).
    SweepAttributes {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the whale's capital share; also compares the steady-state error
    /// with theory.
    SweepWhale {
        #[command(flatten)]
        common: Common,
    },
    /// Price recovery after a whale shock for several herding strengths.
    HerdingRecovery {
        #[command(flatten)]
        common: Common,
        /// Proportionality constant `c` in `alpha = c * lambda * m (1 - m)`.
        #[arg(long, default_value_t = 1.0)]
        alpha_scale: f64,
    },
    /// AR(2) stability maps over aggregate herding and stubbornness.
    StabilityRegion {
        /// Feedback gains, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = presets::DEFAULT_ALPHAS)]
        alphas: Vec<f64>,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plots: bool,
    },
}

/// What a command produced.
#[derive(Debug)]
pub struct Report {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

pub fn run(cli: Cli) -> Result<Report, CliError> {
    match cli.command {
        Command::Run { scenario, common } => commands::run_scenario(&scenario, &common),
        Command::SweepAttributes { common } => commands::sweep_attributes(&common),
        Command::SweepWhale { common } => commands::sweep_whale(&common),
        Command::HerdingRecovery {
            common,
            alpha_scale,
        } => commands::herding_recovery(&common, alpha_scale),
        Command::StabilityRegion {
            alphas,
            resolution,
            out,
            no_plots,
        } => commands::stability_region(&alphas, resolution, out, !no_plots),
    }
}
