//! `bore`: featurize, train, predict, evaluate and budget sweeps from the
//! command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CommonArgs;

/// Bad flags, config or input data. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "bore", version, about = "Bagged outlier representation ensembles")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split, scale and score the data; write the representation of both parts.
    Featurize,
    /// Train an ensemble on the training split and write model.json.
    Train {
        /// Prediction-time cost budget. Costs are drawn from the cost pool.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Score rows of --data with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Probability above which a row is labeled an outlier.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Compute AUC, partial AUC and precision on labeled data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Evaluate on the held-out part of the split the model was trained
        /// with instead of on every row of --data.
        #[arg(long)]
        holdout: bool,
    },
    /// Compare selection strategies over a range of budgets.
    BudgetSweep {
        /// Absolute budgets, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "budget_fractions")]
        budgets: Option<Vec<f64>>,
        /// Budgets as fractions of the total column cost, comma separated.
        #[arg(long = "budget-fractions", value_delimiter = ',')]
        budget_fractions: Option<Vec<f64>>,
        /// Number of random cost assignments to average over.
        #[arg(long)]
        replicates: Option<usize>,
        /// Subset of budgeted, plain_omp, random (comma separated).
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        /// Random subsets averaged per budget by the random strategy.
        #[arg(long = "random-draws")]
        random_draws: Option<usize>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<bore_core::Error>() {
        Some(e) if e.is_input_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
