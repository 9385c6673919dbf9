//! K-nearest-neighbour vote over a stored training set.

use serde::{Deserialize, Serialize};

use super::{KnnParams, KnnWeights};
use crate::ingest::LabeledDataset;

const DIST_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub weights: KnnWeights,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl KnnModel {
    pub fn fit(ds: &LabeledDataset, p: &KnnParams) -> KnnModel {
        KnnModel {
            k: p.n_neighbors,
            weights: p.weights,
            points: ds.rows.clone(),
            labels: ds.labels.clone(),
        }
    }

    /// Euclidean neighbours, ties broken by training index. Returns vote
    /// fractions that sum to one.
    pub fn vote(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k, cmp);
            dist.truncate(k);
        }
        dist.sort_by(cmp);
        let mut votes = vec![0.0; n_classes];
        for &(d, i) in &dist {
            votes[self.labels[i]] += match self.weights {
                KnnWeights::Uniform => 1.0,
                KnnWeights::Distance => 1.0 / (d + DIST_EPS),
            };
        }
        let total: f64 = votes.iter().sum();
        if total > 0.0 {
            votes.iter_mut().for_each(|v| *v /= total);
        }
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: usize, weights: KnnWeights) -> KnnModel {
        KnnModel {
            k,
            weights,
            points: vec![vec![0.0], vec![1.0], vec![3.0], vec![4.0]],
            labels: vec![0, 0, 1, 1],
        }
    }

    #[test]
    fn one_neighbour_returns_training_label() {
        let m = model(1, KnnWeights::Distance);
        assert_eq!(m.vote(&[3.0], 2), vec![0.0, 1.0]);
        assert_eq!(m.vote(&[1.0], 2), vec![1.0, 0.0]);
    }

    #[test]
    fn inverse_distance_weights() {
        // neighbours of 1.5: 1.0 (d .5, class 0), 0.0 (d 1.5, class 0), 3.0 (d 1.5, class 1)
        let m = model(3, KnnWeights::Distance);
        let v = m.vote(&[1.5], 2);
        let w = [1.0 / (0.5 + DIST_EPS), 1.0 / (1.5 + DIST_EPS), 1.0 / (1.5 + DIST_EPS)];
        let total: f64 = w.iter().sum();
        assert!((v[0] - (w[0] + w[1]) / total).abs() < 1e-12);
        assert!((v[1] - w[2] / total).abs() < 1e-12);
    }

    #[test]
    fn distance_ties_take_lowest_index() {
        // 2.0 is equidistant from 1.0 and 3.0; k=1 keeps index 1
        let m = model(1, KnnWeights::Uniform);
        assert_eq!(m.vote(&[2.0], 2), vec![1.0, 0.0]);
    }
}
