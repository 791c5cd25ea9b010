//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "converse",
    version,
    about = "Stance classification and rumor veracity prediction over conversation trees",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with planted stance dynamics.
    Synth(SynthArgs),
    /// Validate a corpus file and emit the canonical form plus statistics.
    Ingest(IngestArgs),
    /// Train a model (fixed split or leave-one-event-out).
    Train(TrainArgs),
    /// Evaluate a saved checkpoint on a corpus.
    Evaluate(EvaluateArgs),
    /// Train once per lambda value and tabulate the veracity scores.
    Sweep(SweepArgs),
    /// Run a named model-variant ablation.
    Ablate(AblateArgs),
    /// Merge run directories into comparison tables and plots.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output corpus path (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub threads: usize,
    #[arg(long, default_value_t = 3)]
    pub min_tweets: usize,
    #[arg(long, default_value_t = 8)]
    pub max_tweets: usize,
    /// Noise vocabulary size.
    #[arg(long, default_value_t = 40)]
    pub vocab: usize,
    /// Number of distinct event tags.
    #[arg(long, default_value_t = 4)]
    pub events: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probability that a token is a stance cue.
    #[arg(long, default_value_t = 0.75)]
    pub cue_rate: f64,
    /// Where to write the statistics CSV (defaults next to the corpus).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Statistics CSV path.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Corpus schema version.
    #[arg(long, default_value = "1")]
    pub format_version: String,
}

/// Options shared by every training-style command.
#[derive(Debug, Args, Clone)]
pub struct TrainOpts {
    /// TOML config file with [model], [veracity] and [train] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training corpus (JSON Lines).
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub outdir: PathBuf,
    /// Held-out test corpus for fixed-split evaluation.
    #[arg(long)]
    pub test_corpus: Option<PathBuf>,
    /// Development corpus for early stopping and model selection.
    #[arg(long)]
    pub dev_corpus: Option<PathBuf>,
    /// Fold the dev corpus into the training set instead of using it for
    /// selection.
    #[arg(long)]
    pub merge_dev: bool,
    /// fixed (default) or loeo (leave-one-event-out over the corpus).
    #[arg(long, default_value = "fixed")]
    pub scheme: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// joint | single-task | stance-only.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// original | customized.
    #[arg(long)]
    pub gcn_variant: Option<String>,
    /// gru | cnn | none.
    #[arg(long)]
    pub rnn: Option<String>,
    /// Drop stance logits from the veracity input.
    #[arg(long)]
    pub no_stance_features: bool,
    /// semeval | pheme: published-scale dimensions and learning rate.
    #[arg(long)]
    pub profile: Option<String>,
    /// Parallel fold workers (loeo only).
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub outdir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Comma-separated lambda values, e.g. `0,0.25,0.5,0.75,1`.
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    pub lambdas: String,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub opts: TrainOpts,
    /// no-stance-features | cnn | no-rnn | original-gcn.
    #[arg(long)]
    pub variant: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories (each containing metrics.json), comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub outdir: PathBuf,
}
