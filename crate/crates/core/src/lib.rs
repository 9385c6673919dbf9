//! Ambient sensing and indoor floor mapping from semi-processed GNSS measurements.
//!
//! The crate is organised along the processing chain:
//!
//! - [`gnss`]: measurement types, validation and epoch grouping.
//! - [`ingest`]: GnssLogger CSV parsing, per-epoch feature vectors, correlation-based
//!   feature selection and the labelled dataset CSV format.
//! - [`ukf`]: unscented Kalman filter used to denoise feature time series.
//! - [`features`]: z-score standardization and linear discriminant analysis.
//! - [`classify`]: tree ensembles, KNN and naive Bayes, evaluation metrics, splits,
//!   cross-validation and permutation importance.
//! - [`floormap`]: activity-landmarked trajectories, alignment, Levenberg-Marquardt
//!   graph optimization and map discrepancy metrics.
//! - [`synth`]: seeded synthetic scenarios for all of the above.
//! - [`pipeline`] and [`report`]: orchestration and versioned JSON reports.

pub mod classify;
pub mod features;
pub mod floormap;
pub mod gnss;
pub mod ingest;
pub mod linalg;
pub mod numfmt;
pub mod pipeline;
pub mod report;
pub mod seed;
pub mod synth;
pub mod ukf;

pub use classify::{EvalReport, Hyperparams, ModelKind, TrainedModel};
pub use gnss::{Constellation, Epoch, Measurement, StateFlag};
pub use ingest::{FeatureVector, LabeledDataset};
