//! The classification chain: UKF denoising, z-scoring, LDA and a classifier,
//! each stage switchable for ablations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::importance::Predictor;
use crate::classify::metrics::{confusion_matrix, EvalReport};
use crate::classify::validation::{cross_validate_with, split_indices, CvReport};
use crate::classify::{train, ClassifyError, Hyperparams, ModelKind, Prediction, TrainedModel};
use crate::features::{fit_lda, fit_standardizer, FeatureError, LdaProjection, Standardizer};
use crate::gnss::Measurement;
use crate::ingest::{extract_features, filter_satellites, Aggregation, ImputationPolicy, IngestError, LabeledDataset};
use crate::seed;
use crate::ukf::{ChannelModel, UkfError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Ukf(#[from] UkfError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ukf: bool,
    pub ukf_model: ChannelModel,
    pub standardize: bool,
    pub lda: bool,
    pub model: ModelKind,
    pub hyperparams: Hyperparams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ukf: true,
            ukf_model: ChannelModel::default(),
            standardize: true,
            lda: true,
            model: ModelKind::Gb,
            hyperparams: Hyperparams::default(),
        }
    }
}

/// Runs the UKF over each recording (maximal same-label run) separately.
pub fn denoise_dataset(ds: &LabeledDataset, model: &ChannelModel) -> Result<LabeledDataset, UkfError> {
    let mut rows = Vec::with_capacity(ds.len());
    for seg in ds.segments() {
        rows.extend(model.denoise_rows(&ds.rows[seg])?);
    }
    Ok(ds.with_rows(rows, ds.feature_names.clone()))
}

/// Applies the time-series stage if enabled. Row-wise stages are fitted
/// later on training rows only.
pub fn prepare(ds: &LabeledDataset, cfg: &PipelineConfig) -> Result<LabeledDataset, PipelineError> {
    if cfg.ukf {
        Ok(denoise_dataset(ds, &cfg.ukf_model)?)
    } else {
        Ok(ds.clone())
    }
}

/// Row-wise stages and the classifier, fitted on (prepared) training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub ukf: Option<ChannelModel>,
    pub standardizer: Option<Standardizer>,
    pub lda: Option<LdaProjection>,
    pub feature_names: Vec<String>,
    pub model: TrainedModel,
}

impl FittedPipeline {
    /// Standardized and projected row, as seen by the classifier.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, PipelineError> {
        if x.len() != self.feature_names.len() {
            return Err(FeatureError::DimMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            }
            .into());
        }
        let mut z = x.to_vec();
        if let Some(st) = &self.standardizer {
            z = st.apply(&z)?;
        }
        if let Some(lda) = &self.lda {
            z = lda.project(&z)?;
        }
        Ok(z)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, PipelineError> {
        Ok(self.model.predict(&self.transform(x)?)?)
    }

    /// Predicted labels of prepared rows.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, PipelineError> {
        rows.iter().map(|r| Ok(self.predict(r)?.label)).collect()
    }

    /// Denoises `ds` with the fitted UKF settings, then scores it.
    pub fn evaluate_raw(&self, ds: &LabeledDataset) -> Result<EvalReport, PipelineError> {
        let ds = match &self.ukf {
            Some(m) => denoise_dataset(ds, m)?,
            None => ds.clone(),
        };
        self.evaluate(&ds)
    }

    /// Scores already prepared rows.
    pub fn evaluate(&self, ds: &LabeledDataset) -> Result<EvalReport, PipelineError> {
        let pred = self.predict_rows(&ds.rows)?;
        let cm = confusion_matrix(&pred, &ds.labels, self.model.n_classes())?;
        Ok(EvalReport::from_confusion(cm))
    }
}

impl Predictor for FittedPipeline {
    fn predict_label(&self, x: &[f64]) -> usize {
        self.predict(x).expect("row width matches the pipeline").label
    }
}

/// Fits standardizer, LDA and classifier on prepared training rows.
pub fn fit_pipeline(train_set: &LabeledDataset, cfg: &PipelineConfig, seed: u64) -> Result<FittedPipeline, PipelineError> {
    let mut ds = train_set.clone();
    let standardizer = if cfg.standardize {
        let st = fit_standardizer(&ds)?;
        ds = st.apply_dataset(&ds)?;
        Some(st)
    } else {
        None
    };
    let lda = if cfg.lda {
        let p = fit_lda(&ds)?;
        ds = p.project_dataset(&ds)?;
        Some(p)
    } else {
        None
    };
    let model = train(cfg.model, &ds, &cfg.hyperparams, seed)?;
    Ok(FittedPipeline {
        ukf: cfg.ukf.then_some(cfg.ukf_model),
        standardizer,
        lda,
        feature_names: train_set.feature_names.clone(),
        model,
    })
}

/// Stratified k-fold CV of the whole chain. The UKF runs once over every
/// recording; everything else is refitted per fold.
pub fn cross_validate_pipeline(ds: &LabeledDataset, cfg: &PipelineConfig, k: usize, seed: u64) -> Result<CvReport, PipelineError> {
    let prepared = prepare(ds, cfg)?;
    let train_root = seed::derive(seed, "cv-train");
    let report = cross_validate_with(&prepared, k, seed::derive(seed, "cv-folds"), |fit_set, test, f| {
        let fp = fit_pipeline(fit_set, cfg, seed::stream(train_root, f as u64)).map_err(to_classify)?;
        fp.predict_rows(&test.rows).map_err(to_classify)
    })?;
    Ok(report)
}

fn to_classify(e: PipelineError) -> ClassifyError {
    match e {
        PipelineError::Classify(c) => c,
        PipelineError::Feature(f) => ClassifyError::Feature(f),
        other => ClassifyError::InvalidParameter(other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub pipeline: FittedPipeline,
    pub report: EvalReport,
    pub n_train: usize,
    pub n_test: usize,
}

/// Stratified train/test split (`ratio` = training share), fit and score.
pub fn split_evaluate(ds: &LabeledDataset, cfg: &PipelineConfig, ratio: f64, seed: u64) -> Result<SplitOutcome, PipelineError> {
    let prepared = prepare(ds, cfg)?;
    let (tr, te) = split_indices(&prepared, ratio, seed::derive(seed, "split"))?;
    let pipeline = fit_pipeline(&prepared.subset(&tr), cfg, seed::derive(seed, "train"))?;
    let report = pipeline.evaluate(&prepared.subset(&te))?;
    Ok(SplitOutcome {
        pipeline,
        report,
        n_train: tr.len(),
        n_test: te.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UkfAblation {
    pub with_ukf: CvReport,
    pub without_ukf: CvReport,
}

impl UkfAblation {
    /// Accuracy with the UKF minus accuracy without it, percentage points.
    pub fn accuracy_delta(&self) -> f64 {
        self.with_ukf.mean.accuracy - self.without_ukf.mean.accuracy
    }
}

/// Same CV (same folds and training seeds) with and without the UKF stage.
pub fn ablate_ukf(ds: &LabeledDataset, cfg: &PipelineConfig, k: usize, seed: u64) -> Result<UkfAblation, PipelineError> {
    let on = PipelineConfig { ukf: true, ..cfg.clone() };
    let off = PipelineConfig { ukf: false, ..cfg.clone() };
    Ok(UkfAblation {
        with_ukf: cross_validate_pipeline(ds, &on, k, seed)?,
        without_ukf: cross_validate_pipeline(ds, &off, k, seed)?,
    })
}

/// One labelled recording of raw measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLog {
    pub class_name: String,
    pub measurements: Vec<Measurement>,
}

/// Builds the epoch feature table from labelled recordings, optionally
/// keeping only a seeded `svid_fraction` of each recording's satellites
/// first. Classes are numbered in order of first appearance.
pub fn dataset_from_logs(
    logs: &[LabeledLog],
    svid_fraction: Option<f64>,
    policy: ImputationPolicy,
    agg: Aggregation,
    seed: u64,
) -> Result<LabeledDataset, IngestError> {
    let root = seed::derive(seed, "svid-subset");
    let mut per_class: Vec<(String, Vec<crate::ingest::FeatureVector>)> = Vec::new();
    for (i, log) in logs.iter().enumerate() {
        let ms = match svid_fraction {
            Some(f) => filter_satellites(&log.measurements, f, seed::stream(root, i as u64))?,
            None => log.measurements.clone(),
        };
        let epochs = crate::gnss::group_into_epochs(&ms).map_err(|_| IngestError::TooFewRows { needed: 1, got: 0 })?;
        let fvs = extract_features(&epochs, policy, agg, &log.class_name)?;
        match per_class.iter_mut().find(|(n, _)| *n == log.class_name) {
            Some((_, v)) => v.extend(fvs),
            None => per_class.push((log.class_name.clone(), fvs)),
        }
    }
    Ok(LabeledDataset::from_feature_vectors(&per_class))
}
