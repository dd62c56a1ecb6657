use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quilt_core::ScoreKind;

#[derive(Debug, Parser)]
#[command(name = "quilt", version, about = "Cluster patchwork-observed data by quilting patchwise SVDs")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mixture data set and its observed patches.
    Simulate(SimulateArgs),
    /// Cluster a patch set.
    Quilt(QuiltArgs),
    /// Compare two label files (ARI and misclustering rate).
    Evaluate(EvaluateArgs),
    /// Choose rank and cluster count by prediction validation.
    Tune(TuneArgs),
    /// Report overlap strengths, conditioning and, with ground truth, the error bound.
    Diagnose(DiagnoseArgs),
    /// Run a simulation grid over one parameter and plot mean ARI.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderingArg {
    Exhaustive,
    Greedy,
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Size,
    Snr,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Size => ScoreKind::Size,
            ScoreArg::Snr => ScoreKind::Snr,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OrderingOpts {
    #[arg(long, value_enum, default_value_t = OrderingArg::Exhaustive)]
    pub ordering: OrderingArg,
    /// JSON array (or a file holding one) used with `--ordering given`.
    #[arg(long)]
    pub permutation: Option<String>,
    #[arg(long, value_enum, default_value_t = ScoreArg::Size)]
    pub score: ScoreArg,
    /// Largest patch count searched exhaustively; beyond it greedy search is used.
    #[arg(long, default_value_t = quilt_core::ordering::DEFAULT_EXHAUSTIVE_CAP)]
    pub exhaustive_cap: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the complete matrix as `full.csv`.
    #[arg(long)]
    pub emit_full: bool,
}

#[derive(Debug, Args)]
pub struct QuiltArgs {
    /// Patch manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long)]
    pub clusters: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub ordering: OrderingOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the rank-r estimate of the full matrix as `imputed.csv`.
    #[arg(long)]
    pub emit_imputed: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub labels_a: PathBuf,
    pub labels_b: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Candidate ranks, comma separated.
    #[arg(long = "rank", value_delimiter = ',', required = true)]
    pub ranks: Vec<usize>,
    /// Candidate cluster counts, comma separated.
    #[arg(long = "clusters", value_delimiter = ',', required = true)]
    pub clusters: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub split_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub ordering: OrderingOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub rank: usize,
    /// `truth.json` written by `simulate`; enables the oracle quantities.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// AR(1) coefficient of the noise, if known.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub ordering: OrderingOpts,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the base seed of the sweep.
    #[arg(long)]
    pub seed: Option<u64>,
}
