//! Command-line workflows: dataset generation, score-model training,
//! threshold calibration, stream monitoring, and tradeoff evaluation.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 numeric/training failure.

mod commands;
mod config;
mod methods;

use clap::{Args, Parser, Subcommand};
use scorewatch::error::Error;

#[derive(Parser)]
#[command(
    name = "scorewatch",
    about = "Sequential change detection with score-based CUSUM statistics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic pre/post-change datasets.
    Datagen(commands::DatagenArgs),
    /// Train a score model on a reference CSV.
    Train(commands::TrainArgs),
    /// Calibrate a detection threshold for a target average run length.
    Calibrate(commands::CalibrateArgs),
    /// Monitor a stream CSV and report the first alarm.
    Detect(commands::DetectArgs),
    /// Produce delay-vs-run-length tradeoff tables for several methods.
    Evaluate(commands::EvaluateArgs),
    /// Decompose score error into estimation and perturbation parts
    /// across a noise-scale grid.
    SigmaTradeoff(commands::SigmaTradeoffArgs),
}

/// Flags shared by every method-selecting command.
#[derive(Args, Debug, Clone, Default)]
pub struct MethodArgs {
    /// Detection method: dsm-cusum, sm-scusum, dsm-cusum-online,
    /// gaussian-cusum, gmm<n>-cusum, exact-cusum, exact-scusum, hotelling.
    #[arg(long)]
    method: String,
    /// Pre-change score model file.
    #[arg(long)]
    model0: Option<std::path::PathBuf>,
    /// Post-change score model file.
    #[arg(long)]
    model1: Option<std::path::PathBuf>,
    /// Pre-change reference CSV (fitted baselines, Hotelling).
    #[arg(long)]
    ref0: Option<std::path::PathBuf>,
    /// Post-change reference CSV (fitted baselines).
    #[arg(long)]
    ref1: Option<std::path::PathBuf>,
    /// Ground-truth pre-change mixture file (exact methods).
    #[arg(long)]
    gmm0: Option<std::path::PathBuf>,
    /// Ground-truth post-change mixture file (exact methods).
    #[arg(long)]
    gmm1: Option<std::path::PathBuf>,
    /// EM iterations for gmm<n>-cusum.
    #[arg(long, default_value_t = 200)]
    em_iters: usize,
    /// Assumed mean-shift magnitude for gaussian-cusum without --ref1.
    #[arg(long)]
    assume_shift: Option<f64>,
    /// Sliding-window length for the online method.
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Gradient steps per time step for the online method.
    #[arg(long, default_value_t = 5)]
    steps: usize,
    /// Online update learning rate.
    #[arg(long, default_value_t = 1e-4)]
    online_lr: f64,
    /// Noise draws per window point for the online method.
    #[arg(long, default_value_t = 1)]
    online_k: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems exit 1; --help/--version exit 0.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::Datagen(args) => commands::cmd_datagen(args),
        Command::Train(args) => commands::cmd_train(args),
        Command::Calibrate(args) => commands::cmd_calibrate(args),
        Command::Detect(args) => commands::cmd_detect(args),
        Command::Evaluate(args) => commands::cmd_evaluate(args),
        Command::SigmaTradeoff(args) => commands::cmd_sigma_tradeoff(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::DimMismatch { .. } => 1,
        Error::Parse { .. } | Error::File { .. } => 2,
        Error::NonFinite { .. }
        | Error::TrainingDiverged { .. }
        | Error::MatchingDiverged { .. }
        | Error::NotPositiveDefinite => 3,
    }
}
