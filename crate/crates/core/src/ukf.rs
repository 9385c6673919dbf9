//! Unscented Kalman filter.
//!
//! The state distribution is carried through the nonlinear transition `f` and
//! observation `h` by `2L + 1` sigma points placed at the mean and at
//! `mean ± column_i(sqrt((L + λ) P))`. The default weights are the standard
//! scaled unscented-transform weights, which reproduce the classical Kalman
//! filter exactly when `f` and `h` are linear.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{clip_psd, psd_cholesky, psd_sqrt_with_jitter, symmetrize};

pub type StateFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UkfError {
    #[error("covariance is not positive semi-definite (jitter up to 1e-6 failed)")]
    NonPsdCovariance,
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("empty measurement series")]
    EmptySeries,
    #[error("step {index}: {source}")]
    Step { index: usize, source: Box<UkfError> },
}

/// Sigma-point weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum WeightScheme {
    /// `W_m0 = λ/(L+λ)`, `W_i = 1/(2(L+λ))`, and
    /// `W_c0 = W_m0 + 1 − α² + β`.
    Standard { alpha: f64, beta: f64 },
    /// `W0 = 1 − 1/λ²`, `W_i = 1/(2Lλ²)`, rescaled to sum to one. Kept for
    /// comparison only: these weights are not an unscented transform and do not
    /// reduce to the Kalman filter for linear models.
    Literal,
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::Standard { alpha: 1.0, beta: 2.0 }
    }
}

#[derive(Clone)]
pub struct UkfConfig {
    pub dim: usize,
    pub lambda: f64,
    pub process_noise: DMatrix<f64>,
    pub measurement_noise: DMatrix<f64>,
    pub transition: StateFn,
    pub observation: StateFn,
    pub weights: WeightScheme,
}

impl std::fmt::Debug for UkfConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UkfConfig")
            .field("dim", &self.dim)
            .field("lambda", &self.lambda)
            .field("process_noise", &self.process_noise)
            .field("measurement_noise", &self.measurement_noise)
            .field("weights", &self.weights)
            .finish_non_exhaustive()
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    m.is_square() && (m - m.transpose()).amax() <= 1e-9 * scale
}

impl UkfConfig {
    /// Config with `λ = 3 − L` and standard weights.
    pub fn new(
        process_noise: DMatrix<f64>,
        measurement_noise: DMatrix<f64>,
        transition: StateFn,
        observation: StateFn,
    ) -> Result<UkfConfig, UkfError> {
        let dim = process_noise.nrows();
        let cfg = UkfConfig {
            dim,
            lambda: 3.0 - dim as f64,
            process_noise,
            measurement_noise,
            transition,
            observation,
            weights: WeightScheme::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<UkfConfig, UkfError> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: WeightScheme) -> Result<UkfConfig, UkfError> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), UkfError> {
        let l = self.dim;
        if l == 0 {
            return Err(UkfError::InvalidConfig("state dimension must be positive".into()));
        }
        if !(l as f64 + self.lambda > 0.0) {
            return Err(UkfError::InvalidConfig(format!("L + λ must be positive (λ = {})", self.lambda)));
        }
        if self.weights == WeightScheme::Literal && self.lambda == 0.0 {
            return Err(UkfError::InvalidConfig("literal weights need λ ≠ 0".into()));
        }
        if self.process_noise.shape() != (l, l) || !is_symmetric(&self.process_noise) {
            return Err(UkfError::InvalidConfig("Q must be a symmetric L×L matrix".into()));
        }
        if psd_cholesky(&self.process_noise).is_none() {
            return Err(UkfError::InvalidConfig("Q must be positive semi-definite".into()));
        }
        let r = &self.measurement_noise;
        if !is_symmetric(r) || r.nrows() == 0 {
            return Err(UkfError::InvalidConfig("R must be a symmetric square matrix".into()));
        }
        if r.clone().cholesky().is_none() {
            return Err(UkfError::InvalidConfig("R must be positive definite".into()));
        }
        Ok(())
    }

    /// Mean and covariance weights for the `2L + 1` sigma points.
    pub fn sigma_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let l = self.dim as f64;
        let n = 2 * self.dim + 1;
        match self.weights {
            WeightScheme::Standard { alpha, beta } => {
                let wi = 1.0 / (2.0 * (l + self.lambda));
                let wm0 = self.lambda / (l + self.lambda);
                let mut wm = vec![wi; n];
                wm[0] = wm0;
                let mut wc = wm.clone();
                wc[0] = wm0 + 1.0 - alpha * alpha + beta;
                (wm, wc)
            }
            WeightScheme::Literal => {
                let lam2 = self.lambda * self.lambda;
                let mut w = vec![1.0 / (2.0 * l * lam2); n];
                w[0] = 1.0 - 1.0 / lam2;
                let sum: f64 = w.iter().sum();
                if sum.abs() > 1e-12 {
                    w.iter_mut().for_each(|v| *v /= sum);
                }
                (w.clone(), w)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UkfState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub step: usize,
}

impl UkfState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> UkfState {
        UkfState { mean, cov, step: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet {
    pub points: Vec<DVector<f64>>,
    pub weights_mean: Vec<f64>,
    pub weights_cov: Vec<f64>,
}

fn check_state(s: &UkfState, cfg: &UkfConfig) -> Result<(), UkfError> {
    if s.mean.len() != cfg.dim {
        return Err(UkfError::DimMismatch {
            expected: cfg.dim,
            got: s.mean.len(),
        });
    }
    if s.cov.shape() != (cfg.dim, cfg.dim) {
        return Err(UkfError::DimMismatch {
            expected: cfg.dim,
            got: s.cov.nrows(),
        });
    }
    Ok(())
}

pub fn generate_sigma_points(s: &UkfState, cfg: &UkfConfig) -> Result<SigmaSet, UkfError> {
    check_state(s, cfg)?;
    let l = cfg.dim;
    let scaled = &s.cov * (l as f64 + cfg.lambda);
    let root = psd_sqrt_with_jitter(&scaled).ok_or(UkfError::NonPsdCovariance)?;
    let mut points = Vec::with_capacity(2 * l + 1);
    points.push(s.mean.clone());
    for i in 0..l {
        points.push(&s.mean + root.column(i));
    }
    for i in 0..l {
        points.push(&s.mean - root.column(i));
    }
    let (weights_mean, weights_cov) = cfg.sigma_weights();
    Ok(SigmaSet {
        points,
        weights_mean,
        weights_cov,
    })
}

fn weighted_mean(points: &[DVector<f64>], w: &[f64]) -> DVector<f64> {
    let mut m = DVector::zeros(points[0].len());
    for (p, wi) in points.iter().zip(w) {
        m.axpy(*wi, p, 1.0);
    }
    m
}

fn weighted_cross(
    a: &[DVector<f64>],
    a_mean: &DVector<f64>,
    b: &[DVector<f64>],
    b_mean: &DVector<f64>,
    w: &[f64],
) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(a_mean.len(), b_mean.len());
    for ((pa, pb), wi) in a.iter().zip(b).zip(w) {
        let da = pa - a_mean;
        let db = pb - b_mean;
        c.ger(*wi, &da, &db, 1.0);
    }
    c
}

/// Propagates the sigma points through `f`; adds `Q`.
pub fn predict(s: &UkfState, cfg: &UkfConfig) -> Result<UkfState, UkfError> {
    let sigma = generate_sigma_points(s, cfg)?;
    let propagated: Vec<DVector<f64>> = sigma.points.iter().map(|p| (cfg.transition)(p)).collect();
    if let Some(p) = propagated.iter().find(|p| p.len() != cfg.dim) {
        return Err(UkfError::DimMismatch {
            expected: cfg.dim,
            got: p.len(),
        });
    }
    let mean = weighted_mean(&propagated, &sigma.weights_mean);
    let mut cov = weighted_cross(&propagated, &mean, &propagated, &mean, &sigma.weights_cov) + &cfg.process_noise;
    symmetrize(&mut cov);
    Ok(UkfState {
        mean,
        cov,
        step: s.step + 1,
    })
}

/// Measurement update. Sigma points are redrawn from the predicted moments.
pub fn update(s: &UkfState, z: &DVector<f64>, cfg: &UkfConfig) -> Result<UkfState, UkfError> {
    let m = cfg.measurement_noise.nrows();
    if z.len() != m {
        return Err(UkfError::DimMismatch { expected: m, got: z.len() });
    }
    let sigma = generate_sigma_points(s, cfg)?;
    let gamma: Vec<DVector<f64>> = sigma.points.iter().map(|p| (cfg.observation)(p)).collect();
    if let Some(g) = gamma.iter().find(|g| g.len() != m) {
        return Err(UkfError::DimMismatch { expected: m, got: g.len() });
    }
    let z_hat = weighted_mean(&gamma, &sigma.weights_mean);
    let mut innovation_cov = weighted_cross(&gamma, &z_hat, &gamma, &z_hat, &sigma.weights_cov) + &cfg.measurement_noise;
    symmetrize(&mut innovation_cov);
    let cross = weighted_cross(&sigma.points, &s.mean, &gamma, &z_hat, &sigma.weights_cov);

    let chol = innovation_cov.clone().cholesky().ok_or(UkfError::SingularInnovation)?;
    // K = C S⁻¹  <=>  Kᵀ = S⁻¹ Cᵀ
    let gain = chol.solve(&cross.transpose()).transpose();
    if gain.iter().any(|v| !v.is_finite()) {
        return Err(UkfError::SingularInnovation);
    }
    let mean = &s.mean + &gain * (z - z_hat);
    let mut cov = &s.cov - &gain * innovation_cov * gain.transpose();
    clip_psd(&mut cov);
    Ok(UkfState {
        mean,
        cov,
        step: s.step,
    })
}

/// Runs predict/update over every sample; returns the filtered means.
pub fn filter_series(zs: &[DVector<f64>], cfg: &UkfConfig, init: &UkfState) -> Result<Vec<DVector<f64>>, UkfError> {
    if zs.is_empty() {
        return Err(UkfError::EmptySeries);
    }
    let mut state = init.clone();
    let mut out = Vec::with_capacity(zs.len());
    for (index, z) in zs.iter().enumerate() {
        let wrap = |e: UkfError| UkfError::Step {
            index,
            source: Box::new(e),
        };
        state = predict(&state, cfg).map_err(wrap)?;
        state = update(&state, z, cfg).map_err(wrap)?;
        out.push(state.mean.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    #[default]
    PerFeature,
    Joint,
}

/// Constant-velocity (value, drift) model used to denoise feature traces.
/// Noise levels come from the trace variance: `Q = q_scale·var·I`,
/// `R = r_scale·var`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    pub q_scale: f64,
    pub r_scale: f64,
    pub lambda: Option<f64>,
    pub weights: WeightScheme,
    pub mode: ChannelMode,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            q_scale: 1e-3,
            r_scale: 1.0,
            lambda: None,
            weights: WeightScheme::default(),
            mode: ChannelMode::PerFeature,
        }
    }
}

fn trace_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    // floor keeps R positive definite for flat traces
    v.max(1e-12 * (1.0 + m * m))
}

fn cv_transition(channels: usize) -> StateFn {
    Arc::new(move |x: &DVector<f64>| {
        let mut y = x.clone();
        for c in 0..channels {
            y[2 * c] = x[2 * c] + x[2 * c + 1];
        }
        y
    })
}

fn cv_observation(channels: usize) -> StateFn {
    Arc::new(move |x: &DVector<f64>| DVector::from_fn(channels, |c, _| x[2 * c]))
}

impl ChannelModel {
    fn config(&self, variances: &[f64]) -> Result<UkfConfig, UkfError> {
        let k = variances.len();
        let q = DMatrix::from_diagonal(&DVector::from_fn(2 * k, |i, _| self.q_scale * variances[i / 2]));
        let r = DMatrix::from_diagonal(&DVector::from_fn(k, |i, _| self.r_scale * variances[i]));
        let mut cfg = UkfConfig::new(q, r, cv_transition(k), cv_observation(k))?.with_weights(self.weights)?;
        if let Some(l) = self.lambda {
            cfg = cfg.with_lambda(l)?;
        }
        Ok(cfg)
    }

    fn init(&self, first: &[f64], variances: &[f64]) -> UkfState {
        let k = first.len();
        let mean = DVector::from_fn(2 * k, |i, _| if i % 2 == 0 { first[i / 2] } else { 0.0 });
        let cov = DMatrix::from_diagonal(&DVector::from_fn(2 * k, |i, _| {
            let v = variances[i / 2];
            if i % 2 == 0 {
                self.r_scale * v
            } else {
                self.q_scale * v
            }
        }));
        UkfState::new(mean, cov)
    }

    /// Filters one scalar trace.
    pub fn denoise(&self, xs: &[f64]) -> Result<Vec<f64>, UkfError> {
        if xs.is_empty() {
            return Err(UkfError::EmptySeries);
        }
        let var = [trace_variance(xs)];
        let cfg = self.config(&var)?;
        let zs: Vec<_> = xs.iter().map(|&x| DVector::from_element(1, x)).collect();
        let out = filter_series(&zs, &cfg, &self.init(&xs[..1], &var))?;
        Ok(out.iter().map(|s| s[0]).collect())
    }

    /// Filters the columns of a row-major table (one recording).
    pub fn denoise_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, UkfError> {
        if rows.is_empty() {
            return Err(UkfError::EmptySeries);
        }
        let d = rows[0].len();
        let columns: Vec<Vec<f64>> = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        match self.mode {
            ChannelMode::PerFeature => {
                let filtered = columns
                    .par_iter()
                    .map(|c| self.denoise(c))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((0..rows.len()).map(|i| filtered.iter().map(|c| c[i]).collect()).collect())
            }
            ChannelMode::Joint => {
                let vars: Vec<f64> = columns.iter().map(|c| trace_variance(c)).collect();
                let cfg = self.config(&vars)?;
                let zs: Vec<_> = rows.iter().map(|r| DVector::from_column_slice(r)).collect();
                let out = filter_series(&zs, &cfg, &self.init(&rows[0], &vars))?;
                Ok(out.iter().map(|s| (0..d).map(|c| s[2 * c]).collect()).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::Rng;

    fn identity_fn() -> StateFn {
        Arc::new(|x: &DVector<f64>| x.clone())
    }

    fn linear_fn(a: DMatrix<f64>) -> StateFn {
        Arc::new(move |x: &DVector<f64>| &a * x)
    }

    fn scalar_cfg(q: f64, r: f64) -> UkfConfig {
        UkfConfig::new(
            DMatrix::from_element(1, 1, q),
            DMatrix::from_element(1, 1, r),
            identity_fn(),
            identity_fn(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_sigma_points() {
        let cfg = scalar_cfg(0.0, 1.0).with_lambda(2.0).unwrap();
        let s = UkfState::new(DVector::from_element(1, 0.0), DMatrix::from_element(1, 1, 1.0));
        let sig = generate_sigma_points(&s, &cfg).unwrap();
        let pts: Vec<f64> = sig.points.iter().map(|p| p[0]).collect();
        assert_eq!(pts[0], 0.0);
        assert!((pts[1] - 3f64.sqrt()).abs() < 1e-15);
        assert!((pts[2] + 3f64.sqrt()).abs() < 1e-15);
        assert!((sig.weights_mean.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_covariance_collapses_points() {
        let q = DMatrix::zeros(3, 3);
        let cfg = UkfConfig::new(q, DMatrix::identity(3, 3), identity_fn(), identity_fn()).unwrap();
        let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let s = UkfState::new(mean.clone(), DMatrix::zeros(3, 3));
        let sig = generate_sigma_points(&s, &cfg).unwrap();
        assert_eq!(sig.points.len(), 7);
        assert!(sig.points.iter().all(|p| *p == mean));
    }

    #[test]
    fn weighted_points_reproduce_moments() {
        let mut rng = crate::seed::rng(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let p = &a * a.transpose();
            let mean = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
            let cfg = UkfConfig::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), identity_fn(), identity_fn()).unwrap();
            let s = UkfState::new(mean.clone(), p.clone());
            let sig = generate_sigma_points(&s, &cfg).unwrap();
            // independent oracle: plain weighted sums
            let mut m = DVector::zeros(2);
            for (pt, w) in sig.points.iter().zip(&sig.weights_mean) {
                m += pt * *w;
            }
            let mut c = DMatrix::zeros(2, 2);
            for (pt, w) in sig.points.iter().zip(&sig.weights_cov) {
                let d = pt - &m;
                c += &d * d.transpose() * *w;
            }
            assert!((m - mean).norm() < 1e-12);
            assert!((c - p).norm() < 1e-10);
        }
    }

    #[test]
    fn predict_identity() {
        let s = UkfState::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        let cfg = UkfConfig::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), identity_fn(), identity_fn()).unwrap();
        let p = predict(&s, &cfg).unwrap();
        assert!((&p.mean - &s.mean).norm() < 1e-12);
        assert!((&p.cov - &s.cov).norm() < 1e-12);

        let cfg = UkfConfig::new(DMatrix::identity(2, 2) * 0.3, DMatrix::identity(2, 2), identity_fn(), identity_fn()).unwrap();
        let p = predict(&s, &cfg).unwrap();
        assert!((&p.cov - (&s.cov + DMatrix::identity(2, 2) * 0.3)).norm() < 1e-12);
    }

    #[test]
    fn predict_linear_matches_kalman() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.7, -0.2, 0.9]);
        let q = DMatrix::from_row_slice(2, 2, &[0.1, 0.02, 0.02, 0.05]);
        let cfg = UkfConfig::new(q.clone(), DMatrix::identity(1, 1), linear_fn(a.clone()), identity_fn()).unwrap();
        let s = UkfState::new(DVector::from_vec(vec![0.3, -1.0]), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]));
        let p = predict(&s, &cfg).unwrap();
        assert!((&p.mean - &a * &s.mean).norm() < 1e-8);
        assert!((&p.cov - (&a * &s.cov * a.transpose() + q)).norm() < 1e-8);
    }

    #[test]
    fn update_limits() {
        let s = UkfState::new(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 2.0));
        let z = DVector::from_element(1, 5.0);
        let post = update(&s, &z, &scalar_cfg(0.0, 1e12)).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-9);
        assert!((post.cov[(0, 0)] - 2.0).abs() < 1e-9);
        let post = update(&s, &z, &scalar_cfg(0.0, 1e-12)).unwrap();
        assert!((post.mean[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn update_linear_matches_kalman() {
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.5]);
        let r = DMatrix::from_element(1, 1, 0.4);
        let cfg = UkfConfig::new(DMatrix::zeros(2, 2), r.clone(), identity_fn(), linear_fn(h.clone())).unwrap();
        let s = UkfState::new(DVector::from_vec(vec![0.3, -1.0]), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]));
        let z = DVector::from_element(1, 2.0);
        let post = update(&s, &z, &cfg).unwrap();
        let sk = &h * &s.cov * h.transpose() + &r;
        let k = &s.cov * h.transpose() * sk.clone().try_inverse().unwrap();
        let x = &s.mean + &k * (&z - &h * &s.mean);
        let p = &s.cov - &k * &sk * k.transpose();
        assert!((post.mean - x).norm() < 1e-8);
        assert!((post.cov - p).norm() < 1e-8);
    }

    #[test]
    fn dimension_checks() {
        let s = UkfState::new(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 2.0));
        assert!(matches!(update(&s, &DVector::zeros(2), &scalar_cfg(0.0, 1.0)), Err(UkfError::DimMismatch { .. })));
        assert!(UkfConfig::new(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), identity_fn(), identity_fn()).is_err());
        assert!(scalar_cfg(0.0, 1.0).with_lambda(-1.0).is_err());
        assert_eq!(filter_series(&[], &scalar_cfg(0.0, 1.0), &s), Err(UkfError::EmptySeries));
    }

    #[test]
    fn literal_weights_are_normalized() {
        let cfg = scalar_cfg(0.0, 1.0).with_lambda(2.0).unwrap().with_weights(WeightScheme::Literal).unwrap();
        let (wm, wc) = cfg.sigma_weights();
        assert!((wm.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(wm, wc);
        // 1 - 1/4 = 0.75 and 1/8 each before rescaling by 1/1.0
        assert!((wm[0] - 0.75).abs() < 1e-12);
        assert!(scalar_cfg(0.0, 1.0).with_lambda(0.0).unwrap().with_weights(WeightScheme::Literal).is_err());
    }

    #[test]
    fn constant_series_converges() {
        let m = ChannelModel::default();
        let xs = vec![4.2; 200];
        let out = m.denoise(&xs).unwrap();
        assert!((out.last().unwrap() - 4.2).abs() < 1e-9);
        assert_eq!(m.denoise(&[3.0]).unwrap().len(), 1);
    }

    #[test]
    fn joint_mode_matches_per_feature() {
        let mut rng = crate::seed::rng(5);
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 * 0.1 + rng.random::<f64>(), rng.random::<f64>() * 3.0]).collect();
        let per = ChannelModel::default().denoise_rows(&rows).unwrap();
        let joint = ChannelModel { mode: ChannelMode::Joint, ..Default::default() }.denoise_rows(&rows).unwrap();
        for (a, b) in per.iter().zip(&joint) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()), "{x} vs {y}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn stays_psd_under_random_steps(seed in any::<u64>()) {
            let mut rng = crate::seed::rng(seed);
            let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
            let f: StateFn = Arc::new(move |x: &DVector<f64>| {
                let y = &a * x;
                DVector::from_vec(vec![y[0] + 0.1 * y[1].sin(), y[1]])
            });
            let h: StateFn = Arc::new(|x: &DVector<f64>| DVector::from_element(1, x[0] + 0.05 * x[0] * x[0].abs().sqrt()));
            let cfg = UkfConfig::new(DMatrix::identity(2, 2) * 1e-3, DMatrix::from_element(1, 1, 0.5), f, h).unwrap();
            let mut s = UkfState::new(DVector::zeros(2), DMatrix::identity(2, 2));
            for _ in 0..10_000 / 16 {
                let pred = predict(&s, &cfg).unwrap();
                let z = DVector::from_element(1, rng.random_range(-3.0..3.0));
                s = update(&pred, &z, &cfg).unwrap();
                prop_assert!(trace(&s.cov) <= trace(&pred.cov) + 1e-9);
                prop_assert!(s.mean.iter().all(|v| v.is_finite()));
                prop_assert!((&s.cov - s.cov.transpose()).amax() < 1e-9);
                let eig = SymmetricEigen::new(s.cov.clone());
                prop_assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-9));
            }
        }
    }
}
