//! Random forest and the single-tree classifier.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, Presorted, Target, Tree, TreeParams};
use super::{DtParams, RfParams};
use crate::ingest::LabeledDataset;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

pub(crate) fn fit_single_tree(ds: &LabeledDataset, p: &DtParams) -> Tree {
    let data = Presorted::new(&ds.rows);
    let weights = vec![1.0; ds.len()];
    let params = TreeParams {
        max_depth: p.max_depth,
        min_samples_split: p.min_samples_split,
        min_samples_leaf: p.min_samples_leaf,
        max_features: None,
    };
    let target = Target::Classes {
        labels: &ds.labels,
        n_classes: ds.n_classes(),
    };
    build_tree(&data, &weights, target, params, None).0
}

impl Forest {
    /// Tree `t` draws its bootstrap and feature subsets from stream `t` of
    /// `seed`, so the result does not depend on thread scheduling.
    pub fn fit(ds: &LabeledDataset, p: &RfParams, seed: u64) -> Forest {
        let n = ds.len();
        let d = ds.dim();
        let data = Presorted::new(&ds.rows);
        let max_features = ((d as f64).sqrt().floor() as usize).clamp(1, d.max(1));
        let params = TreeParams {
            max_depth: p.max_depth,
            min_samples_split: p.min_samples_split,
            min_samples_leaf: p.min_samples_leaf,
            max_features: Some(max_features),
        };
        let trees = (0..p.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::stream(seed, t as u64));
                let mut weights = vec![0.0; n];
                if p.bootstrap {
                    for _ in 0..n {
                        weights[rng.random_range(0..n)] += 1.0;
                    }
                } else {
                    weights.fill(1.0);
                }
                let target = Target::Classes {
                    labels: &ds.labels,
                    n_classes: ds.n_classes(),
                };
                build_tree(&data, &weights, target, params, Some(&mut rng)).0
            })
            .collect();
        Forest { trees }
    }

    /// Mean of the per-tree leaf class fractions.
    pub fn vote_fractions(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let mut acc = vec![0.0; n_classes];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.predict(x)) {
                *a += v;
            }
        }
        let k = self.trees.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }
}
