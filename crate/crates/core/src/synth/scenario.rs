//! Class-conditional GNSS measurement streams.
//!
//! Every parameter of a class follows a latent per-epoch AR(1) Gaussian
//! process (mean, epoch-level sd) plus independent per-satellite noise.
//! Pseudorange rate and accumulated delta range are driven by Doppler shift
//! and carrier phase through the linear constants `k_pr` and `k_adr`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::gnss::{group_into_epochs, Constellation, Epoch, Measurement, StateFlag};
use crate::ingest::{extract_features, nine_feature_dataset, write_gnss_log, Aggregation, ImputationPolicy, LabeledDataset};
use crate::numfmt::round_sig9;
use crate::seed::{self, Rng};

/// Latent parameters in generation order.
pub const LATENT_NAMES: [&str; 7] = ["doppler", "pru", "rec_sv_tu", "carrier_phase", "adrng_u", "cn0", "rss"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dist {
    pub mean: f64,
    /// Spread of the per-epoch latent value.
    pub epoch_sd: f64,
    /// Independent spread of each satellite around the epoch value.
    pub sat_sd: f64,
}

impl Dist {
    pub const fn new(mean: f64, epoch_sd: f64, sat_sd: f64) -> Dist {
        Dist { mean, epoch_sd, sat_sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassProfile {
    pub name: String,
    /// Doppler shift, Hz.
    pub doppler: Dist,
    /// Pseudorange-rate uncertainty, m/s.
    pub pru: Dist,
    /// Received SV time uncertainty, ns.
    pub rec_sv_tu: Dist,
    /// Carrier phase, cycles. `None` when the receiver reports no ADR.
    pub carrier_phase: Option<Dist>,
    /// ADR uncertainty, m. Ignored without `carrier_phase`.
    pub adrng_u: Option<Dist>,
    /// Carrier-to-noise density, dB-Hz.
    pub cn0: Dist,
    /// Received signal strength, dBm; AGC follows it linearly.
    pub rss: Dist,
    /// Probability that a measurement carries the millisecond-ambiguity flag.
    pub ambiguity_prob: f64,
    /// Probability that a given satellite is tracked in a given epoch.
    pub visibility: f64,
    /// Extra latent correlations `(a, b, rho)` by names in [`LATENT_NAMES`].
    #[serde(default)]
    pub correlations: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub classes: Vec<ClassProfile>,
    pub epochs_per_class: usize,
    pub n_satellites: u32,
    /// `PR = -k_pr · doppler`, m per cycle.
    pub k_pr: f64,
    /// `ADR = -k_adr · carrier_phase`, m per cycle.
    pub k_adr: f64,
    /// AR(1) coefficient of the latent epoch process.
    pub latent_ar: f64,
    /// Epoch-level correlation between `cn0` and `bb_cn0`.
    pub cn0_bb_correlation: f64,
    /// Mean of `bb_cn0 - cn0`, dB-Hz.
    pub bb_cn0_offset: f64,
    /// `agc = agc_gain · rss + agc_offset`.
    pub agc_gain: f64,
    pub agc_offset: f64,
    pub start_time_ms: i64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::default_five_class()
    }
}

impl ScenarioSpec {
    /// Five environments with invented magnitudes that follow the qualitative
    /// contrasts of each setting: open sky has strong signals and small
    /// uncertainties, indoor and crowded places the reverse, the metro
    /// reports no ADR and flight shows large Doppler.
    pub fn default_five_class() -> ScenarioSpec {
        let class = |name: &str,
                     doppler: Dist,
                     pru: Dist,
                     rec: Dist,
                     phase: Option<Dist>,
                     adru: Option<Dist>,
                     cn0: Dist,
                     rss: Dist,
                     amb: f64,
                     vis: f64| ClassProfile {
            name: name.to_string(),
            doppler,
            pru,
            rec_sv_tu: rec,
            carrier_phase: phase,
            adrng_u: adru,
            cn0,
            rss,
            ambiguity_prob: amb,
            visibility: vis,
            correlations: Vec::new(),
        };
        ScenarioSpec {
            classes: vec![
                class(
                    "flight",
                    Dist::new(900.0, 250.0, 300.0),
                    Dist::new(0.15, 0.06, 0.08),
                    Dist::new(30.0, 12.0, 15.0),
                    Some(Dist::new(4000.0, 1500.0, 1500.0)),
                    Some(Dist::new(0.006, 0.003, 0.003)),
                    Dist::new(31.0, 3.0, 4.0),
                    Dist::new(34.0, 3.0, 2.0),
                    0.1,
                    0.7,
                ),
                class(
                    "indoor",
                    Dist::new(3.0, 6.0, 15.0),
                    Dist::new(0.6, 0.2, 0.25),
                    Dist::new(90.0, 30.0, 40.0),
                    Some(Dist::new(400.0, 200.0, 250.0)),
                    Some(Dist::new(0.02, 0.007, 0.008)),
                    Dist::new(24.0, 3.0, 4.0),
                    Dist::new(30.0, 3.0, 2.0),
                    0.6,
                    0.35,
                ),
                class(
                    "metro",
                    Dist::new(40.0, 30.0, 40.0),
                    Dist::new(0.9, 0.3, 0.35),
                    Dist::new(150.0, 50.0, 60.0),
                    None,
                    None,
                    Dist::new(20.0, 3.0, 4.0),
                    Dist::new(26.0, 3.0, 2.0),
                    0.7,
                    0.25,
                ),
                class(
                    "open_ground",
                    Dist::new(5.0, 4.0, 10.0),
                    Dist::new(0.05, 0.02, 0.03),
                    Dist::new(12.0, 5.0, 6.0),
                    Some(Dist::new(50.0, 30.0, 40.0)),
                    Some(Dist::new(0.003, 0.0015, 0.0015)),
                    Dist::new(42.0, 3.0, 4.0),
                    Dist::new(45.0, 3.0, 2.0),
                    0.05,
                    0.9,
                ),
                class(
                    "outdoor_crowded",
                    Dist::new(10.0, 6.0, 15.0),
                    Dist::new(0.25, 0.1, 0.12),
                    Dist::new(40.0, 15.0, 20.0),
                    Some(Dist::new(200.0, 100.0, 120.0)),
                    Some(Dist::new(0.01, 0.004, 0.004)),
                    Dist::new(33.0, 3.0, 4.0),
                    Dist::new(38.0, 3.0, 2.0),
                    0.3,
                    0.6,
                ),
            ],
            epochs_per_class: 1000,
            n_satellites: 24,
            k_pr: -0.19,
            k_adr: -0.19,
            latent_ar: 0.9,
            cn0_bb_correlation: 0.98,
            bb_cn0_offset: 3.0,
            agc_gain: 1.0,
            agc_offset: 0.0,
            start_time_ms: 1_700_000_000_000,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.classes.len() < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes.len()));
        }
        let names: BTreeSet<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
        if names.len() != self.classes.len() {
            return bad("class names must be unique".into());
        }
        if self.epochs_per_class == 0 || self.n_satellites == 0 {
            return bad("epochs_per_class and n_satellites must be positive".into());
        }
        if !(self.k_pr < 0.0 && self.k_adr < 0.0) {
            return bad("k_pr and k_adr must be negative".into());
        }
        if !(self.latent_ar.abs() < 1.0) {
            return bad("latent_ar must lie in (-1, 1)".into());
        }
        if !(self.cn0_bb_correlation.abs() <= 1.0) {
            return bad("cn0_bb_correlation must lie in [-1, 1]".into());
        }
        for c in &self.classes {
            let dists = [Some(c.doppler), Some(c.pru), Some(c.rec_sv_tu), c.carrier_phase, c.adrng_u, Some(c.cn0), Some(c.rss)];
            for d in dists.iter().flatten() {
                if !(d.epoch_sd >= 0.0 && d.sat_sd >= 0.0 && d.mean.is_finite()) {
                    return bad(format!("class `{}`: spreads must be non-negative", c.name));
                }
            }
            for p in [c.ambiguity_prob, c.visibility] {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("class `{}`: probability {p} outside [0, 1]", c.name));
                }
            }
            if c.visibility == 0.0 {
                return bad(format!("class `{}`: visibility must be positive", c.name));
            }
            latent_cholesky(c)?;
        }
        Ok(())
    }
}

fn latent_cholesky(c: &ClassProfile) -> Result<DMatrix<f64>, SynthError> {
    let n = LATENT_NAMES.len();
    let mut m = DMatrix::<f64>::identity(n, n);
    for (a, b, rho) in &c.correlations {
        let idx = |s: &str| {
            LATENT_NAMES
                .iter()
                .position(|n| *n == s)
                .ok_or_else(|| SynthError::InvalidSpec(format!("class `{}`: unknown latent `{s}`", c.name)))
        };
        let (i, j) = (idx(a)?, idx(b)?);
        if i == j || !(rho.abs() < 1.0) {
            return Err(SynthError::InvalidSpec(format!("class `{}`: bad correlation {a}/{b} = {rho}", c.name)));
        }
        m[(i, j)] = *rho;
        m[(j, i)] = *rho;
    }
    m.cholesky()
        .map(|ch| ch.l())
        .ok_or_else(|| SynthError::InvalidSpec(format!("class `{}`: correlations are not positive definite", c.name)))
}

/// One continuous recording of a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub class_name: String,
    pub measurements: Vec<Measurement>,
}

impl Recording {
    pub fn raw_log(&self) -> String {
        let mut out = Vec::new();
        write_gnss_log(&self.measurements, &format!("synthetic recording: {}", self.class_name), &mut out)
            .expect("writing to memory");
        String::from_utf8(out).expect("log text is ASCII")
    }

    pub fn epochs(&self) -> Vec<Epoch> {
        group_into_epochs(&self.measurements).expect("recordings are non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub recordings: Vec<Recording>,
    pub dataset: LabeledDataset,
}

impl GeneratedScenario {
    /// Epoch table with `bb_cn0` next to `cn0`.
    pub fn nine_feature_dataset(&self) -> LabeledDataset {
        let classes: Vec<(String, Vec<Epoch>)> =
            self.recordings.iter().map(|r| (r.class_name.clone(), r.epochs())).collect();
        nine_feature_dataset(&classes).expect("generated epochs are valid")
    }
}

fn satellite(index: u32) -> (Constellation, u32) {
    if index < 32 {
        (Constellation::Gps, index + 1)
    } else {
        (Constellation::Galileo, index - 31)
    }
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn generate_recording(spec: &ScenarioSpec, class_index: usize, rng: &mut Rng) -> Recording {
    let c = &spec.classes[class_index];
    let l = latent_cholesky(c).expect("validated");
    let phi = spec.latent_ar;
    let innov = (1.0 - phi * phi).sqrt();
    let base_state = StateFlag::CODE_LOCK.0 | StateFlag::BIT_SYNC.0 | StateFlag::SUBFRAME_SYNC.0 | StateFlag::TOW_DECODED.0;
    let t0 = spec.start_time_ms + class_index as i64 * 100_000_000;
    let expected_sats = (c.visibility * spec.n_satellites as f64).max(1.0);
    let cn0_epoch_sd = (c.cn0.epoch_sd.powi(2) + c.cn0.sat_sd.powi(2) / expected_sats).sqrt();
    let rho = spec.cn0_bb_correlation;

    let mut z = vec![0.0; LATENT_NAMES.len()];
    let mut measurements = Vec::new();
    for e in 0..spec.epochs_per_class {
        let eps: Vec<f64> = (0..z.len()).map(|_| normal(rng)).collect();
        for i in 0..z.len() {
            let corr: f64 = (0..=i).map(|k| l[(i, k)] * eps[k]).sum();
            z[i] = if e == 0 { corr } else { phi * z[i] + innov * corr };
        }
        let latent = |d: &Dist, i: usize| d.mean + d.epoch_sd * z[i];
        let mut visible: Vec<u32> = (0..spec.n_satellites).filter(|_| rng.random::<f64>() < c.visibility).collect();
        if visible.is_empty() {
            visible.push(rng.random_range(0..spec.n_satellites));
        }
        let utc = t0 + e as i64 * 1000;
        let first = measurements.len();
        for &s in &visible {
            let (constellation, sv_id) = satellite(s);
            let mut draw = |d: &Dist, i: usize| latent(d, i) + d.sat_sd * normal(rng);
            let doppler = draw(&c.doppler, 0);
            let pru = draw(&c.pru, 1).abs();
            let rec = draw(&c.rec_sv_tu, 2).abs();
            let adr = c.carrier_phase.as_ref().map(|d| -spec.k_adr * draw(d, 3));
            let adr_u = match (&c.carrier_phase, &c.adrng_u) {
                (Some(_), Some(d)) => Some(draw(d, 4).abs()),
                (Some(_), None) => Some(0.0),
                _ => None,
            };
            let cn0 = draw(&c.cn0, 5).clamp(0.0, 63.0);
            let rss = draw(&c.rss, 6);
            let ambiguous = rng.random::<f64>() < c.ambiguity_prob;
            measurements.push(Measurement {
                utc_time_ms: utc,
                time_nanos: None,
                sv_id,
                constellation,
                pr: round_sig9(-spec.k_pr * doppler),
                pru: round_sig9(pru),
                rec_sv_tu: round_sig9(rec),
                adrng: adr.map(round_sig9),
                adrng_u: adr_u.map(round_sig9),
                cn0: round_sig9(cn0),
                bb_cn0: None,
                agc: round_sig9(spec.agc_gain * rss + spec.agc_offset),
                state: if ambiguous { base_state | StateFlag::MSEC_AMBIGUOUS.0 } else { base_state },
            });
        }
        // Baseband C/N0 is correlated with the epoch's mean C/N0 at `rho`
        // while keeping the satellites' spread around it.
        let epoch = &mut measurements[first..];
        let cn0_mean = epoch.iter().map(|m| m.cn0).sum::<f64>() / epoch.len() as f64;
        let bb_mean = c.cn0.mean
            + spec.bb_cn0_offset
            + rho * (cn0_mean - c.cn0.mean)
            + (1.0 - rho * rho).max(0.0).sqrt() * cn0_epoch_sd * normal(rng);
        for m in epoch {
            m.bb_cn0 = Some(round_sig9(m.cn0 - cn0_mean + bb_mean));
        }
    }
    Recording {
        class_name: c.name.clone(),
        measurements,
    }
}

/// Generates one recording per class and the epoch feature dataset built
/// from them. Each class draws from its own seed stream.
pub fn generate_labeled_dataset(spec: &ScenarioSpec) -> Result<GeneratedScenario, SynthError> {
    spec.validate()?;
    let root = seed::derive(spec.seed, "synth");
    let recordings: Vec<Recording> = (0..spec.classes.len())
        .into_par_iter()
        .map(|k| generate_recording(spec, k, &mut seed::rng(seed::stream(root, k as u64))))
        .collect();
    let per_class = recordings
        .iter()
        .map(|r| {
            let fvs = extract_features(&r.epochs(), ImputationPolicy::DatasetMean, Aggregation::Mean, &r.class_name)?;
            Ok((r.class_name.clone(), fvs))
        })
        .collect::<Result<Vec<_>, crate::ingest::IngestError>>()?;
    let dataset = LabeledDataset::from_feature_vectors(&per_class);
    Ok(GeneratedScenario { recordings, dataset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{correlation_matrix, parse_gnss_log, FEATURE_NAMES};

    fn small(epochs: usize) -> ScenarioSpec {
        ScenarioSpec {
            epochs_per_class: epochs,
            ..ScenarioSpec::default()
        }
    }

    #[test]
    fn label_counts_are_exact() {
        let g = generate_labeled_dataset(&small(1000)).unwrap();
        assert_eq!(g.dataset.len(), 5000);
        assert_eq!(g.dataset.class_counts(), vec![1000; 5]);
        assert_eq!(g.dataset.feature_names, FEATURE_NAMES.map(String::from).to_vec());
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate_labeled_dataset(&small(50)).unwrap();
        let b = generate_labeled_dataset(&small(50)).unwrap();
        assert_eq!(a, b);
        let mut other = small(50);
        other.seed = 8;
        assert_ne!(a.dataset, generate_labeled_dataset(&other).unwrap().dataset);
    }

    #[test]
    fn cn0_and_baseband_correlate_as_configured() {
        let g = generate_labeled_dataset(&small(1000)).unwrap();
        let nine = g.nine_feature_dataset();
        for k in 0..5 {
            let idx: Vec<usize> = (0..nine.len()).filter(|&i| nine.labels[i] == k).collect();
            let cm = correlation_matrix(&nine.subset(&idx)).unwrap();
            let r = cm.get("cn0", "bb_cn0").unwrap();
            assert!((r - 0.98).abs() <= 0.02, "class {k}: {r}");
        }
    }

    #[test]
    fn ambiguity_fractions_follow_probabilities() {
        let spec = small(400);
        let g = generate_labeled_dataset(&spec).unwrap();
        for (rec, c) in g.recordings.iter().zip(&spec.classes) {
            let n = rec.measurements.len() as f64;
            let amb = rec.measurements.iter().filter(|m| m.has_flag(StateFlag::MSEC_AMBIGUOUS)).count() as f64;
            assert!((amb / n - c.ambiguity_prob).abs() <= 0.05, "{}: {}", c.name, amb / n);
        }
    }

    #[test]
    fn metro_reports_no_adr() {
        let g = generate_labeled_dataset(&small(20)).unwrap();
        let metro = g.recordings.iter().find(|r| r.class_name == "metro").unwrap();
        assert!(metro.measurements.iter().all(|m| m.adrng.is_none() && m.adrng_u.is_none()));
        let flight = &g.recordings[0];
        assert!(flight.measurements.iter().all(|m| m.adrng.is_some()));
    }

    #[test]
    fn raw_log_round_trip() {
        let g = generate_labeled_dataset(&small(60)).unwrap();
        for (k, rec) in g.recordings.iter().enumerate() {
            let parsed = parse_gnss_log(rec.raw_log().as_bytes()).unwrap();
            assert!(parsed.diagnostics.skipped.is_empty());
            assert_eq!(parsed.measurements, rec.measurements);
            let epochs = group_into_epochs(&parsed.measurements).unwrap();
            let fvs = extract_features(&epochs, ImputationPolicy::DatasetMean, Aggregation::Mean, "").unwrap();
            let rows: Vec<&Vec<f64>> = (0..g.dataset.len()).filter(|&i| g.dataset.labels[i] == k).map(|i| &g.dataset.rows[i]).collect();
            assert_eq!(rows.len(), fvs.len());
            for (a, b) in rows.iter().zip(&fvs) {
                for (x, y) in a.iter().zip(&b.values) {
                    assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-12), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn sample_means_within_three_sigma() {
        // cn0 is far from its clamp bounds, so its mean is unbiased
        let spec = small(1000);
        let g = generate_labeled_dataset(&spec).unwrap();
        let phi = spec.latent_ar;
        for (k, c) in spec.classes.iter().enumerate() {
            let vals: Vec<f64> = (0..g.dataset.len()).filter(|&i| g.dataset.labels[i] == k).map(|i| g.dataset.rows[i][5]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sats = c.visibility * spec.n_satellites as f64;
            // AR(1) inflates the variance of a sample mean by (1+φ)/(1−φ)
            let var = c.cn0.epoch_sd.powi(2) / n * (1.0 + phi) / (1.0 - phi) + c.cn0.sat_sd.powi(2) / (n * sats);
            assert!((mean - c.cn0.mean).abs() <= 3.0 * var.sqrt(), "{}: {mean}", c.name);
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = small(10);
        s.k_pr = 0.19;
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        let mut s = small(10);
        s.classes.truncate(1);
        assert!(s.validate().is_err());
        let mut s = small(10);
        s.classes[0].ambiguity_prob = 1.5;
        assert!(s.validate().is_err());
        let mut s = small(10);
        s.classes[0].correlations = vec![("cn0".into(), "nope".into(), 0.5)];
        assert!(s.validate().is_err());
    }

    #[test]
    fn latent_correlation_is_applied() {
        let mut s = small(2000);
        s.latent_ar = 0.0;
        s.classes[3].correlations = vec![("cn0".into(), "rss".into(), 0.9)];
        let g = generate_labeled_dataset(&s).unwrap();
        let idx: Vec<usize> = (0..g.dataset.len()).filter(|&i| g.dataset.labels[i] == 3).collect();
        let cm = correlation_matrix(&g.dataset.subset(&idx)).unwrap();
        assert!(cm.get("cn0", "agc").unwrap() > 0.6);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let s = ScenarioSpec::default();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(toml::from_str::<ScenarioSpec>(&text).unwrap(), s);
    }
}
