use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "aad-bench", version, about = "Benchmark auditory attention decoders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Cross-validate algorithms on a dataset.
    Evaluate(EvaluateArgs),
    /// Aggregate a results directory across subjects.
    Report(ReportArgs),
    /// Compute MESD values from a curves CSV.
    Mesd(MesdArgs),
    /// Summarize a dataset.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML run configuration; the `[synth]` table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory; overrides `dataset` in the config.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated algorithm ids; overrides `eval.algorithms`.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<String>>,
    /// Results directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `evaluate`.
    pub results: PathBuf,
    /// Where to write the summary tables; defaults to the results directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MesdArgs {
    /// Curves CSV (`algorithm,subject,tau,accuracy,n_decisions`).
    pub curves: PathBuf,
    /// TOML run configuration; the `[eval.mesd]` table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub dataset: PathBuf,
    /// Also write the summary as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
