//! Permutation feature importance.

use rand::seq::SliceRandom;

use super::TrainedModel;
use crate::ingest::LabeledDataset;
use crate::seed;

/// Anything that maps a feature row to a class id.
pub trait Predictor {
    fn predict_label(&self, x: &[f64]) -> usize;
}

impl Predictor for TrainedModel {
    fn predict_label(&self, x: &[f64]) -> usize {
        self.predict(x).expect("row width matches the model").label
    }
}

fn error_rate<P: Predictor + ?Sized>(m: &P, rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let wrong = rows.iter().zip(labels).filter(|(r, &l)| m.predict_label(r) != l).count();
    wrong as f64 / rows.len() as f64
}

/// Mean increase in error rate (in `[0, 1]` units) when column `j` is
/// shuffled, for every column of `ds`.
pub fn permutation_importance<P: Predictor + ?Sized>(m: &P, ds: &LabeledDataset, n_repeats: usize, seed: u64) -> Vec<f64> {
    let base = error_rate(m, &ds.rows, &ds.labels);
    let mut rows = ds.rows.clone();
    (0..ds.dim())
        .map(|j| {
            let mut rng = seed::rng(seed::stream(seed, j as u64));
            let original = ds.column(j);
            let mut total = 0.0;
            for _ in 0..n_repeats {
                let mut col = original.clone();
                col.shuffle(&mut rng);
                for (r, v) in rows.iter_mut().zip(&col) {
                    r[j] = *v;
                }
                total += error_rate(m, &rows, &ds.labels) - base;
            }
            for (r, v) in rows.iter_mut().zip(&original) {
                r[j] = *v;
            }
            if n_repeats == 0 {
                0.0
            } else {
                total / n_repeats as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    struct FirstColumnSign;
    impl Predictor for FirstColumnSign {
        fn predict_label(&self, x: &[f64]) -> usize {
            (x[0] > 0.0) as usize
        }
    }

    fn planted(n: usize) -> LabeledDataset {
        let mut rng = seed::rng(11);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = i % 2;
            rows.push(vec![if l == 1 { 1.0 } else { -1.0 }, rng.random::<f64>()]);
            labels.push(l);
        }
        LabeledDataset::new(vec!["key".into(), "noise".into()], rows, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn determining_feature_ranks_first_and_noise_is_flat() {
        let ds = planted(400);
        let s = permutation_importance(&FirstColumnSign, &ds, 20, 3);
        assert!(s[0] > 0.3, "{s:?}");
        assert!(s[1].abs() < 0.02, "{s:?}");
    }

    #[test]
    fn single_row_has_zero_importance() {
        let ds = planted(1);
        assert_eq!(permutation_importance(&FirstColumnSign, &ds, 5, 0), vec![0.0, 0.0]);
    }
}
