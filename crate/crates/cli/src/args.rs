use std::path::PathBuf;

use androcon::classify::ModelKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "androcon", version, about = "Ambient sensing and floor mapping from raw GNSS measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse GnssLogger logs into an epoch feature dataset.
    Parse(ParseArgs),
    /// Generate a synthetic labelled dataset, raw logs and walked trajectories.
    Synth(SynthArgs),
    /// Denoise a dataset with the UKF and optionally drop correlated features.
    Filter(FilterArgs),
    /// Fit the processing chain and a classifier, and save it.
    Train(TrainArgs),
    /// Cross-validate or split-evaluate, or score a saved model.
    Eval(EvalArgs),
    /// Permutation feature importance on a held-out split.
    Importance(ImportanceArgs),
    /// Build a landmark floor map from activity-labelled trajectories.
    Map(MapArgs),
    /// Render a saved evaluation report as a table or confusion CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Root seed of every random step.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with `seed`, `[pipeline]` and `[map]` settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StageToggles {
    /// Skip UKF denoising.
    #[arg(long)]
    pub no_ukf: bool,
    /// Skip z-score standardization.
    #[arg(long)]
    pub no_standardize: bool,
    /// Skip the LDA projection.
    #[arg(long)]
    pub no_lda: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Imputation {
    Zero,
    DatasetMean,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Agg {
    Mean,
    Median,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// GnssLogger text logs, one recording each.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Class label per input, in the same order (default: file stem).
    #[arg(long = "label", num_args = 1..)]
    pub labels: Vec<String>,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Imputation::DatasetMean)]
    pub impute: Imputation,
    #[arg(long, value_enum, default_value_t = Agg::Mean)]
    pub agg: Agg,
    /// Keep only this fraction of each log's satellites before extraction.
    #[arg(long)]
    pub svid_subset: Option<f64>,
    /// Where to write the per-file parse diagnostics as JSON.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario TOML (default: the built-in five-class scenario).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Floor layout TOML (default: the built-in corridor loop).
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Overrides the seeds of both specs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Drop one feature of every pair with |Pearson r| at or above this.
    #[arg(long)]
    pub drop_correlated: Option<f64>,
    /// Only drop correlated features; skip the UKF.
    #[arg(long)]
    pub no_ukf: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    #[command(flatten)]
    pub toggles: StageToggles,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset CSV, or a directory of raw logs named `<class>.csv`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_model, conflicts_with = "model_file")]
    pub model: Option<ModelKind>,
    /// Score a model saved by `train` instead of fitting one.
    #[arg(long, conflicts_with_all = ["cv", "split", "ablate_ukf", "svid_subset"])]
    pub model_file: Option<PathBuf>,
    /// Number of stratified folds (default 10).
    #[arg(long, conflicts_with = "split")]
    pub cv: Option<usize>,
    /// Training share of a stratified train/test split.
    #[arg(long)]
    pub split: Option<f64>,
    /// Also run without the UKF and report the accuracy difference.
    #[arg(long)]
    pub ablate_ukf: bool,
    /// Keep this fraction of satellites before feature extraction (raw-log
    /// input only) and compare with the full set.
    #[arg(long)]
    pub svid_subset: Option<f64>,
    /// Also write the (mean) confusion matrix as CSV.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    #[command(flatten)]
    pub toggles: StageToggles,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[command(flatten)]
    pub toggles: StageToggles,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Trajectory CSV (`t,x,y,activity_label,source_id`).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Also render the map as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Ground-truth map JSON to score against (GDM and SDM).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    ConfusionCsv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    /// Output file (default: standard output).
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}
