use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const DATA_ENV: &str = "STVO_ESN_DATA";

#[derive(Debug, Parser)]
#[command(
    name = "stvo-esn",
    version,
    about = "Spin-torque-oscillator echo-state network experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download dataset files from configured mirrors and verify checksums.
    Fetch(FetchArgs),
    /// Grid-search the STVO operating point on a validation split.
    Calibrate(CalibrateArgs),
    /// Train one model and write it as a JSON artifact.
    Train(TrainArgs),
    /// Evaluate a model artifact on the test split.
    Eval(EvalArgs),
    /// Linear regression directly on the PCA projection (no reservoir).
    Baseline(ExperimentArgs),
    /// Run every (n_theta, activation) cell over all mask seeds.
    Sweep(SweepArgs),
    /// Render SVG charts from stored results.
    Plot(PlotArgs),
    /// Print model metadata.
    Inspect(InspectArgs),
}

/// Options resolving an experiment configuration. Flags override the
/// config file; `--set` overrides everything.
#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// TOML experiment description.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mnist, emnist-letters or fashion-mnist.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub n_theta: Option<usize>,
    /// stvo, relu, sigmoid or identity.
    #[arg(long)]
    pub activation: Option<String>,
    /// Mask seeds: "0..10", "1,4,7" or a single value.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub j_dc: Option<f64>,
    #[arg(long)]
    pub d_t: Option<f64>,
    /// Ridge strength (0 = pseudoinverse).
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Number of PCA components (overrides the variance target).
    #[arg(long)]
    pub n_f: Option<usize>,
    /// Dataset root directory.
    #[arg(long, env = DATA_ENV)]
    pub data_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Raw config override, `key=value` with dotted keys (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Dataset to fetch (default: all with known mirrors).
    #[arg(long)]
    pub dataset: Option<String>,
    /// TOML file listing mirror URLs and checksums (default: built-in list).
    #[arg(long)]
    pub mirrors: Option<PathBuf>,
    #[arg(long, env = DATA_ENV)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Bias values to try.
    #[arg(long, value_delimiter = ',')]
    pub grid_j_dc: Option<Vec<f64>>,
    /// Amplitudes to try.
    #[arg(long, value_delimiter = ',')]
    pub grid_amplitude: Option<Vec<f64>>,
    /// Sampling intervals to try (empty list: default interval per bias).
    #[arg(long, value_delimiter = ',')]
    pub grid_d_t: Option<Vec<f64>>,
    /// Reservoir size used while calibrating.
    #[arg(long, default_value_t = 200)]
    pub calib_n_theta: usize,
    /// Validation samples taken from the end of the training set.
    #[arg(long, default_value_t = 5000)]
    pub validation: usize,
    /// Cap on fitting samples.
    #[arg(long)]
    pub max_fit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Mask seed for this model (default: first configured seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Artifact file name inside the output directory.
    #[arg(long, default_value = "model.json")]
    pub model_name: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model artifact written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, env = DATA_ENV)]
    pub data_dir: Option<PathBuf>,
    /// Also write predicted labels, one per line.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Reservoir sizes, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_theta_values: Vec<usize>,
    /// Activations to compare (default: all four).
    #[arg(long, value_delimiter = ',')]
    pub activations: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// results.json or sweep.jsonl.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}
