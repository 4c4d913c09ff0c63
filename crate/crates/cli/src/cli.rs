use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::error::CliError;
use crate::exec::RayonExecutor;
use crate::stages::{self, Context};

#[derive(Debug, Parser)]
#[command(name = "shm-locate", version, about = "Damage localisation from transmissibility novelty features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labelled transmissibility dataset.
    GenData(Common),
    /// Fit per-window baselines and compute novelty features.
    Features(Common),
    /// Genetic selection of a feature subset.
    Select(Common),
    /// Train a classifier with restarts and early stopping.
    Train(Common),
    /// Copy and freeze a classifier's first layer, then train a new output layer.
    Transfer(Common),
    /// Confusion matrix of a classifier on one split.
    Evaluate(Common),
    /// Principal-component scores of features or hidden activations.
    Pca(Common),
    /// Full comparison: nine-class, split and transferred classifiers.
    Experiment(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace the configured master seed.
    #[arg(long)]
    pub seed_override: Option<u64>,
    /// Print nothing but errors.
    #[arg(long, short, conflicts_with = "verbose")]
    pub quiet: bool,
    /// Log progress to standard error.
    #[arg(long, short)]
    pub verbose: bool,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::GenData(c)
            | Command::Features(c)
            | Command::Select(c)
            | Command::Train(c)
            | Command::Transfer(c)
            | Command::Evaluate(c)
            | Command::Pca(c)
            | Command::Experiment(c) => c,
        }
    }
}

/// Parses the config file, or an empty object when none was given.
fn load<T: DeserializeOwned>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return serde_json::from_str("{}").map_err(|e| CliError::usage(e.to_string()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
}

/// Runs one subcommand and returns the text for standard output.
pub fn dispatch(command: &Command) -> Result<String, CliError> {
    let common = command.common();
    let config = common.config.as_deref();
    let ctx = Context {
        out: common.out.clone(),
        config_dir: config
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default(),
        seed_override: common.seed_override,
        exec: RayonExecutor::from_env()?,
    };
    match command {
        Command::GenData(_) => stages::gen_data(&ctx, &load(config)?),
        Command::Features(_) => stages::features(&ctx, &load(config)?),
        Command::Select(_) => stages::select(&ctx, &load(config)?),
        Command::Train(_) => stages::train(&ctx, &load(config)?),
        Command::Transfer(_) => stages::transfer(&ctx, &load(config)?),
        Command::Evaluate(_) => stages::evaluate(&ctx, &load(config)?),
        Command::Pca(_) => stages::pca(&ctx, &load(config)?),
        Command::Experiment(_) => stages::experiment(&ctx, &load(config)?),
    }
}
