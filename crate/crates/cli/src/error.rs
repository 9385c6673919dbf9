use std::fmt::Debug;
use std::path::PathBuf;

use androcon::classify::ClassifyError;
use androcon::features::FeatureError;
use androcon::floormap::MapError;
use androcon::ingest::IngestError;
use androcon::pipeline::PipelineError;
use androcon::synth::SynthError;
use androcon::ukf::UkfError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input `{}` does not exist", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config `{}`: {message}", path.display())]
    InvalidConfig { path: PathBuf, message: String },
    #[error("report `{}`: {message}", path.display())]
    InvalidReport { path: PathBuf, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Ukf(#[from] UkfError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Map(#[from] MapError),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(e) => e.into(),
            PipelineError::Feature(e) => e.into(),
            PipelineError::Ukf(e) => e.into(),
            PipelineError::Classify(e) => e.into(),
        }
    }
}

/// Leading identifier of a `Debug` rendering: the enum variant name.
fn variant<E: Debug>(e: &E) -> String {
    let d = format!("{e:?}");
    d.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("").to_string()
}

impl CliError {
    /// Usage errors exit with 2, data errors with 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Module-qualified error code, e.g. `ingest::HeaderMissing`.
    pub fn code(&self) -> String {
        match self {
            CliError::MissingInput(_) => "cli::MissingInput".into(),
            CliError::Usage(_) => "cli::Usage".into(),
            CliError::Io { .. } => "cli::Io".into(),
            CliError::InvalidConfig { .. } => "cli::InvalidConfig".into(),
            CliError::InvalidReport { .. } => "cli::InvalidReport".into(),
            CliError::Ingest(e) => format!("ingest::{}", variant(e)),
            CliError::Feature(e) => format!("features::{}", variant(e)),
            CliError::Ukf(e) => format!("ukf::{}", variant(e)),
            CliError::Classify(ClassifyError::Feature(e)) => format!("features::{}", variant(e)),
            CliError::Classify(e) => format!("classify::{}", variant(e)),
            CliError::Synth(SynthError::Ingest(e)) => format!("ingest::{}", variant(e)),
            CliError::Synth(e) => format!("synth::{}", variant(e)),
            CliError::Map(e) => format!("floormap::{}", variant(e)),
        }
    }
}
