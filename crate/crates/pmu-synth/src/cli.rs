use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pmu-synth", version, about = "Simulate, synthesize and validate PMU current records")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration (JSON). Flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for simulation, training and generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Report progress on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a training corpus and write `dataset.csv`.
    Simulate(SimulateArgs),
    /// Train the GAN on a dataset and write `checkpoint.json` and loss curves.
    Train(TrainArgs),
    /// Sample synthetic records from a checkpoint into `synthetic.csv`.
    Generate(GenerateArgs),
    /// Score records with swing-equation identification.
    Validate(ValidateArgs),
    /// Marginal Wasserstein distances between two datasets.
    Wdist(WdistArgs),
    /// Compare back-propagated gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Smib,
    Ninebus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriticOutputArg {
    Linear,
    Sigmoid,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub system: Option<SystemArg>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset CSV.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Total iterations; a resumed run continues up to this count.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Continue from a checkpoint instead of fresh models.
    #[arg(long, value_name = "PATH")]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub critic_steps: Option<usize>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub noise_dim: Option<usize>,
    #[arg(long, value_enum)]
    pub critic_output: Option<CriticOutputArg>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, conflicts_with = "no_filter")]
    pub filter_cutoff: Option<f64>,
    #[arg(long, conflicts_with = "no_filter")]
    pub filter_order: Option<usize>,
    /// Keep the raw generator output.
    #[arg(long)]
    pub no_filter: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Largest mean relative error still counted as realistic.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct WdistArgs {
    #[arg(value_name = "DATASET_A")]
    pub a: PathBuf,
    #[arg(value_name = "DATASET_B")]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Network specs (JSON); the configured training specs when absent.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Scales the critic's back-propagated gradient to exercise the failure path.
    #[arg(long, hide = true)]
    pub corrupt_backward: bool,
}
