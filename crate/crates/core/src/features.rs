//! Z-score standardization and linear discriminant analysis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::LabeledDataset;
use crate::linalg::{symmetrize, trace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("within-class scatter is singular even after regularization")]
    SingularScatter,
    #[error("degenerate classes: {0}")]
    DegenerateClasses(String),
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Features whose variance was zero on the fitting set (std forced to 1).
    pub constant: Vec<bool>,
}

pub fn fit_standardizer(ds: &LabeledDataset) -> Result<Standardizer, FeatureError> {
    fit_standardizer_rows(&ds.rows)
}

pub fn fit_standardizer_rows(rows: &[Vec<f64>]) -> Result<Standardizer, FeatureError> {
    let n = rows.len();
    if n < 2 {
        return Err(FeatureError::TooFewRows { needed: 2, got: n });
    }
    let d = rows[0].len();
    let means: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut stds = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    for j in 0..d {
        let var = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        // relative test so a column like {1e9, 1e9 + ulp} still counts as flat
        let flat = !(sd > 1e-12 * (1.0 + means[j].abs()));
        constant.push(flat);
        stds.push(if flat { 1.0 } else { sd });
    }
    Ok(Standardizer { means, stds, constant })
}

impl Standardizer {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if x.len() != self.means.len() {
            return Err(FeatureError::DimMismatch {
                expected: self.means.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_dataset(&self, ds: &LabeledDataset) -> Result<LabeledDataset, FeatureError> {
        let rows = ds.rows.iter().map(|r| self.apply(r)).collect::<Result<_, _>>()?;
        Ok(ds.with_rows(rows, ds.feature_names.clone()))
    }
}

pub fn apply_standardizer(st: &Standardizer, fv: &[f64]) -> Result<Vec<f64>, FeatureError> {
    st.apply(fv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LdaWarning {
    /// Between-class scatter vanishes: the classes are not separable linearly.
    DegenerateClasses,
}

/// Fitted LDA projection `x -> Wᵀ x` onto `C − 1` discriminant directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaProjection {
    /// `d × (C−1)`, unit-norm columns, stored row-major.
    pub w: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub class_means: Vec<Vec<f64>>,
    pub fitted_classes: usize,
    pub warnings: Vec<LdaWarning>,
}

/// Within- and between-class scatter matrices.
pub fn scatter_matrices(rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut counts = vec![0usize; n_classes];
    let mut means = vec![DVector::<f64>::zeros(d); n_classes];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        means[l] += DVector::from_column_slice(r);
    }
    let mut overall = DVector::<f64>::zeros(d);
    for (m, &c) in means.iter_mut().zip(&counts) {
        overall += &*m;
        if c > 0 {
            *m /= c as f64;
        }
    }
    overall /= n;
    let mut sw = DMatrix::<f64>::zeros(d, d);
    for (r, &l) in rows.iter().zip(labels) {
        let dx = DVector::from_column_slice(r) - &means[l];
        sw.ger(1.0, &dx, &dx, 1.0);
    }
    let mut sb = DMatrix::<f64>::zeros(d, d);
    for (m, &c) in means.iter().zip(&counts) {
        if c > 0 {
            let dm = m - &overall;
            sb.ger(c as f64, &dm, &dm, 1.0);
        }
    }
    symmetrize(&mut sw);
    symmetrize(&mut sb);
    (sw, sb)
}

/// Fisher criterion `trace((Wᵀ S_w W)⁻¹ Wᵀ S_b W)`.
pub fn fisher_criterion(w: &DMatrix<f64>, sw: &DMatrix<f64>, sb: &DMatrix<f64>) -> Option<f64> {
    let a = w.transpose() * sw * w;
    let b = w.transpose() * sb * w;
    let inv = a.try_inverse()?;
    Some(trace(&(inv * b)))
}

pub fn fit_lda(ds: &LabeledDataset) -> Result<LdaProjection, FeatureError> {
    let c = ds.n_classes();
    let d = ds.dim();
    let counts = ds.class_counts();
    if c < 2 {
        return Err(FeatureError::DegenerateClasses(format!("need at least 2 classes, got {c}")));
    }
    if let Some((k, n)) = counts.iter().enumerate().find(|(_, &n)| n < 2) {
        return Err(FeatureError::DegenerateClasses(format!(
            "class `{}` has {n} rows, need at least 2",
            ds.class_names[k]
        )));
    }
    if d < c - 1 {
        return Err(FeatureError::DimMismatch { expected: c - 1, got: d });
    }

    let (mut sw, sb) = scatter_matrices(&ds.rows, &ds.labels, c);
    // The absolute floor keeps all-constant inputs factorable.
    let eps = (1e-6 * trace(&sw) / d as f64).max(1e-12);
    for i in 0..d {
        sw[(i, i)] += eps;
    }
    // Whitening: S_w = L Lᵀ, M = L⁻¹ S_b L⁻ᵀ, W = L⁻ᵀ V.
    let chol = sw.clone().cholesky().ok_or(FeatureError::SingularScatter)?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or(FeatureError::SingularScatter)?;
    let mut m = &l_inv * &sb * l_inv.transpose();
    symmetrize(&mut m);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let k = c - 1;
    let mut w = DMatrix::<f64>::zeros(d, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let mut dir = l_inv.transpose() * v;
        let norm = dir.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(FeatureError::SingularScatter);
        }
        dir /= norm;
        // sign: largest-magnitude entry positive (first index wins ties)
        let mut pivot = 0;
        for i in 1..d {
            if dir[i].abs() > dir[pivot].abs() {
                pivot = i;
            }
        }
        if dir[pivot] < 0.0 {
            dir = -dir;
        }
        w.set_column(col, &dir);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }

    let mut warnings = Vec::new();
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    if top < 1e-10 {
        warnings.push(LdaWarning::DegenerateClasses);
    }

    let mut class_means = vec![vec![0.0; d]; c];
    for (r, &lbl) in ds.rows.iter().zip(&ds.labels) {
        for j in 0..d {
            class_means[lbl][j] += r[j];
        }
    }
    for (m, &n) in class_means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= n as f64);
    }

    Ok(LdaProjection {
        w: (0..d).map(|i| w.row(i).iter().copied().collect()).collect(),
        eigenvalues,
        class_means,
        fitted_classes: c,
        warnings,
    })
}

impl LdaProjection {
    pub fn input_dim(&self) -> usize {
        self.w.len()
    }

    pub fn output_dim(&self) -> usize {
        self.fitted_classes - 1
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.input_dim();
        let k = self.output_dim();
        DMatrix::from_fn(d, k, |i, j| self.w[i][j])
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if x.len() != self.input_dim() {
            return Err(FeatureError::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let k = self.output_dim();
        let mut out = vec![0.0; k];
        for (xi, wrow) in x.iter().zip(&self.w) {
            for j in 0..k {
                out[j] += wrow[j] * xi;
            }
        }
        Ok(out)
    }

    pub fn project_dataset(&self, ds: &LabeledDataset) -> Result<LabeledDataset, FeatureError> {
        let rows = ds.rows.iter().map(|r| self.project(r)).collect::<Result<_, _>>()?;
        let names = (0..self.output_dim()).map(|j| format!("ld{}", j + 1)).collect();
        Ok(ds.with_rows(rows, names))
    }
}

pub fn project(p: &LdaProjection, fv: &[f64]) -> Result<Vec<f64>, FeatureError> {
    p.project(fv)
}

/// Largest principal angle (radians) between the column spaces of `a` and `b`.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let s = (qa.transpose() * qb).singular_values();
    let smallest = s.iter().copied().fold(f64::INFINITY, f64::min).clamp(-1.0, 1.0);
    smallest.acos()
}
