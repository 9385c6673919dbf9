//! Event classifiers, evaluation and permutation importance.
//!
//! Five model families are supported: a single decision tree, a random
//! forest, one-vs-rest gradient boosting, distance-weighted KNN and Gaussian
//! naive Bayes. Defaults for every hyperparameter follow the tuned values the
//! pipeline ships with (see [`Hyperparams`]).

mod boosting;
mod forest;
pub mod importance;
mod knn;
pub mod metrics;
mod naive_bayes;
pub mod tree;
pub mod validation;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::LabeledDataset;

pub use boosting::BoostedModel;
pub use forest::Forest;
pub use importance::{permutation_importance, Predictor};
pub use knn::KnnModel;
pub use metrics::{eval_metrics, ClassMetrics, EvalReport};
pub use naive_bayes::GaussianNb;
pub use tree::Tree;
pub use validation::{cross_validate, split_train_test, stratified_folds, CvReport};

pub const MODEL_FORMAT: &str = "androcon-model/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("dataset needs at least two populated classes")]
    DegenerateDataset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("class `{class}` has {count} rows, need at least {needed}")]
    ClassTooSmall { class: String, count: usize, needed: usize },
    #[error("prediction and truth lengths differ ({preds} vs {truth})")]
    LengthMismatch { preds: usize, truth: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported model format `{0}`")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dt,
    Rf,
    Gb,
    Knn,
    Nb,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Dt, ModelKind::Rf, ModelKind::Gb, ModelKind::Knn, ModelKind::Nb];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
            ModelKind::Gb => "gb",
            ModelKind::Knn => "knn",
            ModelKind::Nb => "nb",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ClassifyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ClassifyError::InvalidParameter(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_estimators: 100,
            max_depth: 10,
            min_samples_split: 10,
            min_samples_leaf: 4,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbParams {
    fn default() -> Self {
        GbParams {
            n_estimators: 100,
            learning_rate: 0.01,
            max_depth: 10,
            min_samples_split: 10,
            min_samples_leaf: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnWeights {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub n_neighbors: usize,
    pub weights: KnnWeights,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            n_neighbors: 10,
            weights: KnnWeights::Distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            max_depth: 20,
            min_samples_split: 20,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    pub var_smoothing: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub rf: RfParams,
    pub gb: GbParams,
    pub knn: KnnParams,
    pub dt: DtParams,
    pub nb: NbParams,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |m: &str| Err(ClassifyError::InvalidParameter(m.to_string()));
        let counts = [
            self.rf.n_estimators,
            self.rf.max_depth,
            self.rf.min_samples_split,
            self.rf.min_samples_leaf,
            self.gb.n_estimators,
            self.gb.max_depth,
            self.gb.min_samples_split,
            self.gb.min_samples_leaf,
            self.knn.n_neighbors,
            self.dt.max_depth,
            self.dt.min_samples_split,
            self.dt.min_samples_leaf,
        ];
        if counts.contains(&0) {
            return bad("all counts must be positive");
        }
        if !(self.gb.learning_rate > 0.0 && self.gb.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.nb.var_smoothing >= 0.0) {
            return bad("var_smoothing must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Fitted {
    Tree { tree: Tree },
    Forest(Forest),
    Boosting(BoostedModel),
    Knn(KnnModel),
    NaiveBayes(GaussianNb),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub class_names: Vec<String>,
    pub n_features: usize,
    pub train_seed: u64,
    pub fitted: Fitted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub scores: Vec<f64>,
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn train(kind: ModelKind, ds: &LabeledDataset, hp: &Hyperparams, seed: u64) -> Result<TrainedModel, ClassifyError> {
    hp.validate()?;
    let populated = ds.class_counts().iter().filter(|&&c| c > 0).count();
    if populated < 2 {
        return Err(ClassifyError::DegenerateDataset);
    }
    let c = ds.n_classes();
    let fitted = match kind {
        ModelKind::Dt => Fitted::Tree {
            tree: forest::fit_single_tree(ds, &hp.dt),
        },
        ModelKind::Rf => Fitted::Forest(Forest::fit(ds, &hp.rf, seed)),
        ModelKind::Gb => Fitted::Boosting(BoostedModel::fit(ds, &hp.gb)),
        ModelKind::Knn => Fitted::Knn(KnnModel::fit(ds, &hp.knn)),
        ModelKind::Nb => Fitted::NaiveBayes(GaussianNb::fit(ds, &hp.nb)),
    };
    debug_assert!(c >= 2);
    Ok(TrainedModel {
        format: MODEL_FORMAT.to_string(),
        kind,
        hyperparams: *hp,
        class_names: ds.class_names.clone(),
        n_features: ds.dim(),
        train_seed: seed,
        fitted,
    })
}

impl TrainedModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Class scores: probabilities for DT/GB/NB, vote fractions for RF/KNN.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, ClassifyError> {
        if x.len() != self.n_features {
            return Err(ClassifyError::DimMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(match &self.fitted {
            Fitted::Tree { tree } => tree.predict(x).to_vec(),
            Fitted::Forest(f) => f.vote_fractions(x, self.n_classes()),
            Fitted::Boosting(b) => b.probabilities(x),
            Fitted::Knn(k) => k.vote(x, self.n_classes()),
            Fitted::NaiveBayes(nb) => nb.posterior(x),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifyError> {
        let scores = self.scores(x)?;
        Ok(Prediction {
            label: argmax(&scores),
            scores,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, ClassifyError> {
        let m: TrainedModel =
            serde_json::from_str(text).map_err(|e| ClassifyError::UnsupportedFormat(e.to_string()))?;
        if m.format != MODEL_FORMAT {
            return Err(ClassifyError::UnsupportedFormat(m.format));
        }
        Ok(m)
    }
}

pub fn predict(m: &TrainedModel, fv: &[f64]) -> Result<Prediction, ClassifyError> {
    m.predict(fv)
}


#[cfg(test)]
mod tests {
    use super::testdata::blobs;
    use super::*;

    #[test]
    fn defaults_match_table() {
        let hp = Hyperparams::default();
        assert_eq!(hp.rf, RfParams { n_estimators: 100, max_depth: 10, min_samples_split: 10, min_samples_leaf: 4, bootstrap: true });
        assert_eq!(hp.gb.n_estimators, 100);
        assert_eq!(hp.gb.learning_rate, 0.01);
        assert_eq!(hp.gb.max_depth, 10);
        assert_eq!((hp.gb.min_samples_split, hp.gb.min_samples_leaf), (10, 4));
        assert_eq!(hp.knn, KnnParams { n_neighbors: 10, weights: KnnWeights::Distance });
        assert_eq!((hp.dt.max_depth, hp.dt.min_samples_split), (20, 20));
        assert_eq!(hp.nb.var_smoothing, 1e-9);
        hp.validate().unwrap();
    }

    #[test]
    fn overrides_from_toml() {
        let hp: Hyperparams = toml::from_str("[gb]\nlearning_rate = 0.1\n[knn]\nn_neighbors = 3\n").unwrap();
        assert_eq!(hp.gb.learning_rate, 0.1);
        assert_eq!(hp.gb.n_estimators, 100);
        assert_eq!(hp.knn.n_neighbors, 3);
        let mut bad = hp;
        bad.gb.learning_rate = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn decision_tree_fits_separable_blobs() {
        let ds = blobs(1, 2, 2, 50, 20.0);
        let m = train(ModelKind::Dt, &ds, &Hyperparams::default(), 0).unwrap();
        let correct = ds.rows.iter().zip(&ds.labels).filter(|(r, &l)| m.predict(r).unwrap().label == l).count();
        assert_eq!(correct, ds.len());
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = blobs(1, 2, 2, 10, 5.0);
        let one = ds.subset(&(0..10).collect::<Vec<_>>());
        for kind in ModelKind::ALL {
            assert_eq!(train(kind, &one, &Hyperparams::default(), 0), Err(ClassifyError::DegenerateDataset));
        }
    }

    #[test]
    fn same_seed_same_predictions_and_json_round_trip() {
        let ds = blobs(2, 3, 3, 40, 3.0);
        let probe = blobs(3, 3, 3, 10, 3.0);
        let mut hp = Hyperparams::default();
        hp.rf.n_estimators = 15;
        hp.gb.n_estimators = 10;
        for kind in ModelKind::ALL {
            let a = train(kind, &ds, &hp, 9).unwrap();
            let b = train(kind, &ds, &hp, 9).unwrap();
            let back = TrainedModel::from_json(&a.to_json()).unwrap();
            for r in &probe.rows {
                let pa = a.predict(r).unwrap();
                assert_eq!(pa, b.predict(r).unwrap(), "{kind}");
                assert_eq!(pa, back.predict(r).unwrap(), "{kind}");
                let s: f64 = pa.scores.iter().sum();
                assert!((s - 1.0).abs() < 1e-9, "{kind}: {s}");
            }
            assert!(matches!(a.predict(&[1.0]), Err(ClassifyError::DimMismatch { .. })));
        }
    }

    #[test]
    fn rejects_foreign_format() {
        let ds = blobs(2, 2, 2, 10, 3.0);
        let mut m = train(ModelKind::Nb, &ds, &Hyperparams::default(), 0).unwrap();
        m.format = "other/9".into();
        assert!(matches!(TrainedModel::from_json(&m.to_json()), Err(ClassifyError::UnsupportedFormat(_))));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("GB".parse::<ModelKind>().unwrap(), ModelKind::Gb);
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
