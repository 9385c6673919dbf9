//! Confusion matrices and per-class one-vs-rest metrics.

use serde::{Deserialize, Serialize};

use super::ClassifyError;

/// Percentages in `[0, 100]`. `acc` is the per-class recall, so it equals
/// `sen` by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub acc: f64,
    pub sen: f64,
    pub spe: f64,
    pub precision: f64,
    pub f_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    /// Overall accuracy in percent.
    pub accuracy: f64,
}

fn pct(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> EvalReport {
        let c = confusion.len();
        let total: u64 = confusion.iter().flatten().sum();
        let diag: u64 = (0..c).map(|k| confusion[k][k]).sum();
        let per_class = (0..c)
            .map(|k| {
                let tp = confusion[k][k];
                let fn_ = confusion[k].iter().sum::<u64>() - tp;
                let fp = (0..c).map(|t| confusion[t][k]).sum::<u64>() - tp;
                let tn = total - tp - fn_ - fp;
                let sen = pct(tp, tp + fn_, 0.0);
                let precision = pct(tp, tp + fp, 0.0);
                let f_score = if precision + sen > 0.0 {
                    2.0 * precision * sen / (precision + sen)
                } else {
                    0.0
                };
                ClassMetrics {
                    acc: sen,
                    sen,
                    // with no negatives there can be no false alarm
                    spe: pct(tn, tn + fp, 100.0),
                    precision,
                    f_score,
                }
            })
            .collect();
        EvalReport {
            confusion,
            per_class,
            accuracy: pct(diag, total, 0.0),
        }
    }

    /// Averages the metrics across reports and sums their confusion matrices.
    pub fn mean(reports: &[EvalReport]) -> Option<EvalReport> {
        let first = reports.first()?;
        let c = first.confusion.len();
        let n = reports.len() as f64;
        let mut confusion = vec![vec![0u64; c]; c];
        let mut per_class = vec![
            ClassMetrics {
                acc: 0.0,
                sen: 0.0,
                spe: 0.0,
                precision: 0.0,
                f_score: 0.0,
            };
            c
        ];
        let mut accuracy = 0.0;
        for r in reports {
            for (row, src) in confusion.iter_mut().zip(&r.confusion) {
                for (a, b) in row.iter_mut().zip(src) {
                    *a += b;
                }
            }
            for (m, s) in per_class.iter_mut().zip(&r.per_class) {
                m.acc += s.acc / n;
                m.sen += s.sen / n;
                m.spe += s.spe / n;
                m.precision += s.precision / n;
                m.f_score += s.f_score / n;
            }
            accuracy += r.accuracy / n;
        }
        Some(EvalReport {
            confusion,
            per_class,
            accuracy,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.confusion.len()
    }
}

pub fn confusion_matrix(preds: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<Vec<u64>>, ClassifyError> {
    if preds.len() != truth.len() {
        return Err(ClassifyError::LengthMismatch {
            preds: preds.len(),
            truth: truth.len(),
        });
    }
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in preds.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(ClassifyError::InvalidParameter(format!(
                "label {} outside {n_classes} classes",
                p.max(t)
            )));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

pub fn eval_metrics(preds: &[usize], truth: &[usize], n_classes: usize) -> Result<EvalReport, ClassifyError> {
    Ok(EvalReport::from_confusion(confusion_matrix(preds, truth, n_classes)?))
}
