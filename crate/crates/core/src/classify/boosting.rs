//! One-vs-rest gradient boosting with logistic loss.
//!
//! Each class gets its own additive model of regression trees fitted to the
//! residuals `y - p`. Leaf values are Newton steps `Σr / Σp(1-p)`, scaled by
//! the learning rate and halved until the class's training loss does not
//! rise. Scores are the per-class sigmoids normalized to sum to one.

use serde::{Deserialize, Serialize};

use super::tree::{build_tree, Node, Presorted, Target, Tree, TreeParams};
use super::GbParams;
use crate::ingest::LabeledDataset;

const P_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub init: Vec<f64>,
    /// `stages[k]` holds the trees of class `k`; leaf values already include
    /// the learning rate.
    pub stages: Vec<Vec<Tree>>,
    /// Mean training log-loss of each one-vs-rest model after each stage.
    pub loss_history: Vec<Vec<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn log_loss(y: &[f64], f: &[f64]) -> f64 {
    // log(1 + e^{-s}) with s = ±f, written to stay finite for large |f|
    let total: f64 = y
        .iter()
        .zip(f)
        .map(|(&yi, &fi)| {
            let s = if yi > 0.5 { fi } else { -fi };
            if s > 0.0 {
                (-s).exp().ln_1p()
            } else {
                -s + s.exp().ln_1p()
            }
        })
        .sum();
    total / y.len().max(1) as f64
}

impl BoostedModel {
    pub fn fit(ds: &LabeledDataset, p: &GbParams) -> BoostedModel {
        let n = ds.len();
        let c = ds.n_classes();
        let data = Presorted::new(&ds.rows);
        let ones = vec![1.0; n];
        let params = TreeParams {
            max_depth: p.max_depth,
            min_samples_split: p.min_samples_split,
            min_samples_leaf: p.min_samples_leaf,
            max_features: None,
        };
        let counts = ds.class_counts();
        let mut init = Vec::with_capacity(c);
        let mut stages = Vec::with_capacity(c);
        let mut loss_history = Vec::with_capacity(c);
        for k in 0..c {
            let y: Vec<f64> = ds.labels.iter().map(|&l| (l == k) as u8 as f64).collect();
            let prior = (counts[k] as f64 / n as f64).clamp(P_CLIP, 1.0 - P_CLIP);
            let f0 = (prior / (1.0 - prior)).ln();
            let mut f = vec![f0; n];
            let mut trees = Vec::with_capacity(p.n_estimators);
            let mut history = Vec::with_capacity(p.n_estimators);
            for _ in 0..p.n_estimators {
                let prob: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
                let resid: Vec<f64> = y.iter().zip(&prob).map(|(a, b)| a - b).collect();
                let (mut tree, leaf_of) =
                    build_tree(&data, &ones, Target::Regression { values: &resid }, params, None);
                let mut num = vec![0.0; tree.nodes.len()];
                let mut den = vec![0.0; tree.nodes.len()];
                let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
                for i in 0..n {
                    let leaf = leaf_of[i] as usize;
                    num[leaf] += resid[i];
                    den[leaf] += prob[i] * (1.0 - prob[i]);
                    members[leaf].push(i);
                }
                for leaf in 0..tree.nodes.len() {
                    if !matches!(tree.nodes[leaf], Node::Leaf { .. }) {
                        continue;
                    }
                    let rows = &members[leaf];
                    let mut step = if den[leaf] > 1e-12 { p.learning_rate * num[leaf] / den[leaf] } else { 0.0 };
                    // Leaves partition the rows, so the loss change of a leaf
                    // only involves its own members.
                    let before: f64 = leaf_loss(rows, &y, &f, 0.0);
                    for _ in 0..50 {
                        if step == 0.0 || leaf_loss(rows, &y, &f, step) <= before {
                            break;
                        }
                        step *= 0.5;
                    }
                    if leaf_loss(rows, &y, &f, step) > before {
                        step = 0.0;
                    }
                    for &i in rows {
                        f[i] += step;
                    }
                    tree.set_leaf_value(leaf, vec![step]);
                }
                history.push(log_loss(&y, &f));
                trees.push(tree);
            }
            init.push(f0);
            stages.push(trees);
            loss_history.push(history);
        }
        BoostedModel {
            init,
            stages,
            loss_history,
        }
    }

    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        self.init
            .iter()
            .zip(&self.stages)
            .map(|(f0, trees)| f0 + trees.iter().map(|t| t.predict(x)[0]).sum::<f64>())
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = self.decision(x).into_iter().map(sigmoid).collect();
        let total: f64 = s.iter().sum();
        if total > 0.0 {
            s.iter().map(|v| v / total).collect()
        } else {
            vec![1.0 / s.len() as f64; s.len()]
        }
    }
}

fn leaf_loss(rows: &[usize], y: &[f64], f: &[f64], step: f64) -> f64 {
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let fs: Vec<f64> = rows.iter().map(|&i| f[i] + step).collect();
    log_loss(&ys, &fs) * rows.len() as f64
}
