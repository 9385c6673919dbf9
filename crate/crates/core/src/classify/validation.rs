//! Stratified hold-out splits and k-fold cross validation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{eval_metrics, EvalReport};
use super::{train, ClassifyError, Hyperparams, ModelKind};
use crate::features::{fit_lda, fit_standardizer};
use crate::ingest::LabeledDataset;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<EvalReport>,
    pub mean: EvalReport,
}

fn shuffled_classes(ds: &LabeledDataset, seed: u64, needed: usize) -> Result<Vec<Vec<usize>>, ClassifyError> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
    for (i, &l) in ds.labels.iter().enumerate() {
        per_class[l].push(i);
    }
    for (k, idx) in per_class.iter().enumerate() {
        if idx.len() < needed {
            return Err(ClassifyError::ClassTooSmall {
                class: ds.class_names[k].clone(),
                count: idx.len(),
                needed,
            });
        }
    }
    let mut rng = seed::rng(seed);
    for idx in &mut per_class {
        idx.shuffle(&mut rng);
    }
    Ok(per_class)
}

/// Row indices `(train, test)`, each sorted. Every class contributes
/// `round(ratio · n_k)` rows to training, clamped so both sides get one.
pub fn split_indices(ds: &LabeledDataset, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ClassifyError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(ClassifyError::InvalidParameter(format!("split ratio {ratio} outside (0, 1)")));
    }
    let per_class = shuffled_classes(ds, seed, 2)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for idx in per_class {
        let n_train = ((ratio * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(
    ds: &LabeledDataset,
    ratio: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), ClassifyError> {
    let (a, b) = split_indices(ds, ratio, seed)?;
    Ok((ds.subset(&a), ds.subset(&b)))
}

/// Test-row indices of each fold. Per-class shuffled lists are concatenated
/// and dealt round-robin, so fold sizes differ by at most one and every
/// class is spread evenly.
pub fn stratified_folds(ds: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ClassifyError> {
    if k < 2 {
        return Err(ClassifyError::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    let per_class = shuffled_classes(ds, seed, k)?;
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in per_class.into_iter().flatten().enumerate() {
        folds[pos % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Runs `fit_predict(train, test, fold)` on every fold and scores the
/// returned test predictions. Folds run in parallel; results keep fold order.
pub fn cross_validate_with<F>(ds: &LabeledDataset, k: usize, seed: u64, fit_predict: F) -> Result<CvReport, ClassifyError>
where
    F: Fn(&LabeledDataset, &LabeledDataset, usize) -> Result<Vec<usize>, ClassifyError> + Sync,
{
    let folds = stratified_folds(ds, k, seed)?;
    let mut in_test = vec![usize::MAX; ds.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            in_test[i] = f;
        }
    }
    let reports = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = (0..ds.len()).filter(|&i| in_test[i] != f).collect();
            let train = ds.subset(&train_idx);
            let test = ds.subset(&folds[f]);
            let preds = fit_predict(&train, &test, f)?;
            eval_metrics(&preds, &test.labels, ds.n_classes())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean = EvalReport::mean(&reports).expect("k >= 2");
    Ok(CvReport { folds: reports, mean })
}

/// k-fold CV of standardizer, LDA and classifier, all refit on each
/// training split. Fold `f` trains with seed stream `f`.
pub fn cross_validate(
    kind: ModelKind,
    ds: &LabeledDataset,
    hp: &Hyperparams,
    k: usize,
    seed: u64,
) -> Result<CvReport, ClassifyError> {
    let fold_seed = seed::derive(seed, "cv-folds");
    let train_seed = seed::derive(seed, "cv-train");
    cross_validate_with(ds, k, fold_seed, |fit_set, test, f| {
        let st = fit_standardizer(fit_set)?;
        let train_s = st.apply_dataset(fit_set)?;
        let lda = fit_lda(&train_s)?;
        let train_p = lda.project_dataset(&train_s)?;
        let model = train(kind, &train_p, hp, seed::stream(train_seed, f as u64))?;
        test.rows
            .iter()
            .map(|r| {
                let z = lda.project(&st.apply(r)?)?;
                Ok(model.predict(&z)?.label)
            })
            .collect()
    })
}
