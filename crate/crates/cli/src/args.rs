use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rmen-cca", version, about = "Regularized two-view canonical correlation analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a planted two-view problem as delimiter-separated files.
    Synth(SynthArgs),
    /// Fit one variant, save the model, report held-out PCC.
    Train(TrainArgs),
    /// Score a saved model on new data.
    Eval(EvalArgs),
    /// Fit several variants on the same split and tabulate them.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives x.csv and y.csv (and x_test.csv, y_test.csv).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Extra samples written to the test files.
    #[arg(long, default_value_t = 0)]
    pub test_samples: usize,
    #[arg(long, default_value_t = 10)]
    pub d1: usize,
    #[arg(long, default_value_t = 10)]
    pub d2: usize,
    /// Planted canonical correlations, descending.
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.8])]
    pub correlations: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Pure-noise features appended to each view.
    #[arg(long, default_value_t = 0)]
    pub noise_features: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    Gaussian,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Json,
    Tsv,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// First view, one sample per line.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Second view, one sample per line.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// MNIST IDX image file; the views are the left and right image halves.
    #[arg(long, conflicts_with_all = ["x", "y"])]
    pub mnist: Option<PathBuf>,
    #[arg(long)]
    pub delimiter: Option<char>,
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    /// JSON file with any of the long flag names as keys; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Minibatch size; switches to the stochastic solver.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long)]
    pub kernel_width: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of the input held out for scoring.
    #[arg(long)]
    pub validation: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// rmen, men, appgrad, closed-form or kernel-rmen.
    #[arg(long)]
    pub variant: Option<String>,
    /// Where to save the fitted model.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Comma-separated variant list.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
