use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::{Format, Units};

/// Default master seed when neither `--seed` nor `COHERENCE_SEED` is set.
pub const DEFAULT_SEED: u64 = 20160314;
pub const SEED_ENV: &str = "COHERENCE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "coherence",
    version,
    about = "Tsallis relative entropy coherence: measures, checks and searches"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate coherence measures on a state file.
    Compute(ComputeArgs),
    /// Evaluate C_α and C̃_α over a grid of α.
    Sweep(SweepArgs),
    /// Run the randomized property suite.
    Verify(VerifyArgs),
    /// Search for a strong-monotonicity violation and write witness files.
    SearchViolation(SearchArgs),
    /// Compare the closed-form minimum with a brute-force simplex grid.
    OracleCompare(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AlphaArgs {
    /// Order α in (0, 2]; repeatable.
    #[arg(long = "alpha", value_name = "A")]
    pub alpha: Vec<f64>,
    /// Inclusive α grid `lo:hi:step`, added to any --alpha values.
    #[arg(long = "alpha-range", value_name = "LO:HI:STEP")]
    pub alpha_range: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write rows here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    Tsallis,
    Rastegin,
    Relent,
    L1,
    Skew,
    C2,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    /// State file: {"dim": d, "entries": [[re, im], ...]}.
    #[arg(long, value_name = "PATH")]
    pub state: PathBuf,
    /// Incoherent channel file; adds the post-selected average and the
    /// strong-monotonicity gap to every row.
    #[arg(long, value_name = "PATH")]
    pub channel: Option<PathBuf>,
    /// Measures to evaluate; repeatable. Defaults to tsallis and rastegin.
    #[arg(long = "measure", value_enum)]
    pub measures: Vec<Measure>,
    #[command(flatten)]
    pub alphas: AlphaArgs,
    #[arg(long, value_enum, default_value_t = Units::Nats)]
    pub units: Units,
    /// Include the optimal incoherent state of each α-measure.
    #[arg(long)]
    pub emit_delta: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_name = "PATH")]
    pub state: PathBuf,
    #[arg(long = "alpha-range", value_name = "LO:HI:STEP")]
    pub alpha_range: String,
    #[arg(long, value_enum, default_value_t = Units::Nats)]
    pub units: Units,
    #[arg(long)]
    pub emit_delta: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// JSON file with TrialConfig fields; its values override flags.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dimension; repeatable.
    #[arg(long = "dim")]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub alphas: AlphaArgs,
    /// Trials per (check, dim, α) cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed; falls back to COHERENCE_SEED, then 20160314.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pass line for every inequality (default 1e-9).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Measure family for the coherence checks: tsallis or rastegin.
    #[arg(long)]
    pub family: Option<String>,
    /// Restrict to these checks; repeatable.
    #[arg(long = "check")]
    pub checks: Vec<String>,
    /// full or mixed-ranks.
    #[arg(long)]
    pub rank_policy: Option<String>,
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Evaluation budget of the violation search run alongside a rastegin
    /// strong-monotonicity suite.
    #[arg(long, default_value_t = 1_000_000)]
    pub search_budget: u64,
    /// Write the summary here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[command(flatten)]
    pub alphas: AlphaArgs,
    /// Evaluation budget.
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// rastegin (default) or tsallis, the latter as a negative control.
    #[arg(long, default_value = "rastegin")]
    pub family: String,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Evaluations per random restart.
    #[arg(long)]
    pub restart_evals: Option<u64>,
    /// Inclusive Kraus-count range `lo:hi`.
    #[arg(long, value_name = "LO:HI")]
    pub kraus: Option<String>,
    /// Directory for witness_state.json, witness_channel.json and witness.json.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub witness_dir: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[command(flatten)]
    pub alphas: AlphaArgs,
    /// Number of random full-rank states.
    #[arg(long, default_value_t = 200)]
    pub states: usize,
    /// Grid spacing; defaults to 1e-4 for d = 2 and 2e-3 for d = 3.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Largest accepted |closed form − oracle|; defaults to 20 × resolution.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}
