use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ptsync", version, about = "Prescribed-time synchronization of multiweighted networks")]
pub struct Cli {
    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural assumptions and compute the coupling threshold.
    Validate(ValidateArgs),
    /// Integrate the network and summarize the synchronization error.
    Simulate(SimulateArgs),
    /// Integrate a scalar model next to its closed form.
    Scalar(ScalarArgs),
    /// Repeat a simulation over a list of parameter values.
    Sweep(SweepArgs),
    /// Print the built-in three-node benchmark as a config document.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Add every node state (and the target) to the CSV.
    #[arg(long)]
    pub full_state: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Lemma2,
    Power,
    Lemma3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegulatorArg {
    Power,
    ExpA,
    ExpB,
}

#[derive(Debug, Args)]
pub struct ScalarArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Lemma2)]
    pub kind: ModelKind,
    #[arg(long, value_enum, default_value_t = RegulatorArg::Power)]
    pub regulator: RegulatorArg,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    /// Exponent of the power regulator.
    #[arg(long, default_value_t = 1.0)]
    pub ell: f64,
    /// Rate of the exponential regulators.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 15.0)]
    pub v0: f64,
    /// Defaults to `1e-3 T`.
    #[arg(long)]
    pub stop_gap: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepParam {
    Eta,
    Ell,
    ShrinkFactor,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_negative_numbers = true)]
    pub values: Vec<f64>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkMode {
    Sync,
    Pinned,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, default_value_t = BenchmarkMode::Sync)]
    pub mode: BenchmarkMode,
    #[arg(long, default_value_t = 0.35)]
    pub eta: f64,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}
