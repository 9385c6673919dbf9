//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::NbParams;
use crate::ingest::LabeledDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Log prior per class; `-inf` for classes absent from training.
    pub log_prior: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub fn fit(ds: &LabeledDataset, p: &NbParams) -> GaussianNb {
        let c = ds.n_classes();
        let d = ds.dim();
        let n = ds.len() as f64;
        // smoothing is relative to the widest feature over the whole set
        let max_var = (0..d)
            .map(|j| {
                let col = ds.column(j);
                let m = col.iter().sum::<f64>() / n;
                col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
            })
            .fold(0.0, f64::max);
        let eps = p.var_smoothing * max_var;
        let counts = ds.class_counts();
        let mut means = vec![vec![0.0; d]; c];
        let mut vars = vec![vec![0.0; d]; c];
        for (r, &l) in ds.rows.iter().zip(&ds.labels) {
            for j in 0..d {
                means[l][j] += r[j];
            }
        }
        for k in 0..c {
            if counts[k] > 0 {
                means[k].iter_mut().for_each(|v| *v /= counts[k] as f64);
            }
        }
        for (r, &l) in ds.rows.iter().zip(&ds.labels) {
            for j in 0..d {
                vars[l][j] += (r[j] - means[l][j]).powi(2);
            }
        }
        for k in 0..c {
            for v in &mut vars[k] {
                *v = if counts[k] > 0 { *v / counts[k] as f64 } else { 0.0 } + eps;
                if *v <= 0.0 {
                    // every feature constant everywhere: any positive width works
                    *v = f64::MIN_POSITIVE.sqrt();
                }
            }
        }
        let log_prior = counts
            .iter()
            .map(|&m| if m > 0 { (m as f64 / n).ln() } else { f64::NEG_INFINITY })
            .collect();
        GaussianNb { log_prior, means, vars }
    }

    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        self.log_prior
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(lp, (m, v))| {
                lp + x
                    .iter()
                    .zip(m.iter().zip(v))
                    .map(|(xi, (mi, vi))| -0.5 * ((2.0 * std::f64::consts::PI * vi).ln() + (xi - mi).powi(2) / vi))
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let lj = self.log_joint(x);
        let top = lj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = lj.iter().map(|v| (v - top).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric() -> LabeledDataset {
        LabeledDataset::new(
            vec!["x".into(), "y".into()],
            vec![vec![-2.0, 0.0], vec![-1.0, 1.0], vec![1.0, 0.0], vec![2.0, 1.0]],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn midpoint_of_symmetric_classes_is_even() {
        let nb = GaussianNb::fit(&symmetric(), &NbParams::default());
        let p = nb.posterior(&[0.0, 0.5]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12, "{p:?}");
        assert!(nb.posterior(&[-1.5, 0.5])[0] > 0.99);
    }

    #[test]
    fn smoothing_scales_with_largest_variance() {
        let nb = GaussianNb::fit(&symmetric(), &NbParams { var_smoothing: 0.1 });
        // overall var of x = 2.5, class var of x = 0.25
        assert!((nb.vars[0][0] - (0.25 + 0.25)).abs() < 1e-12);
        assert!((nb.vars[0][1] - (0.25 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn far_query_stays_finite() {
        let nb = GaussianNb::fit(&symmetric(), &NbParams::default());
        let p = nb.posterior(&[1e6, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_eq!(p[1], 1.0);
    }
}
