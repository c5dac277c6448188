//! Reproducible experiment runs over the moire sensor toolkit.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use commands::Common;
pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "moire", version, about = "Design, simulate and calibrate a dual-grating moire tactile sensor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON). Defaults to `config.json` in the input
    /// directory, then to built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the render and dataset seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace this command's existing outputs.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form design table over the configured pitch pairs.
    Design {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render the dataset frames, wrench table and manifest.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Reduce rendered frames to the feature table.
    Extract {
        /// Directory holding `reference.pgm` and the frames.
        #[arg(long)]
        input: PathBuf,
        /// Frame folder inside the input directory.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit the calibration model on features and wrenches.
    Calibrate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        wrenches: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score a model on a dataset table.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the contact gate over a frame stream.
    Gate {
        /// Directory holding `reference.pgm` and the stream.
        #[arg(long)]
        input: PathBuf,
        /// Frame folder inside the input directory.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl From<&CommonArgs> for Common {
    fn from(a: &CommonArgs) -> Self {
        Common {
            config: a.config.clone(),
            out: a.out.clone(),
            seed: a.seed,
            overwrite: a.overwrite,
        }
    }
}

/// Runs one verb and returns its JSON summary.
pub fn execute(command: &Command) -> CliResult<Value> {
    match command {
        Command::Design { common } => commands::design::run(&common.into()),
        Command::Simulate { common } => commands::simulate::run(&common.into()),
        Command::Extract { input, frames, common } => commands::extract::run(&common.into(), input, frames.as_deref()),
        Command::Calibrate {
            features,
            wrenches,
            common,
        } => commands::calibrate::run(&common.into(), features, wrenches),
        Command::Eval { model, dataset, common } => commands::eval::run(&common.into(), model, dataset),
        Command::Gate { input, frames, common } => commands::gate::run(&common.into(), input, frames.as_deref()),
    }
}
