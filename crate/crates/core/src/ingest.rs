//! GnssLogger log parsing, per-epoch feature extraction and feature selection.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnss::{self, field, validate_measurement, Epoch, Measurement, StateFlag};
use crate::numfmt::fmt_sig9;
use crate::seed;

/// Canonical feature order. `BbCN0` is not part of it (it duplicates `CN0`).
pub const FEATURE_NAMES: [&str; 8] = [
    "pr",
    "pru",
    "rec_sv_tu",
    "adrng",
    "adrng_u",
    "cn0",
    "agc",
    "msec_ambiguous_fraction",
];
pub const N_FEATURES: usize = 8;
pub const ADRNG: usize = 3;
pub const ADRNG_U: usize = 4;
pub const MSEC_FRACTION: usize = 7;

/// GnssLogger `Raw` column names mapped onto canonical measurement fields.
const COLUMN_MAP: [(&str, &str); 13] = [
    ("utcTimeMillis", field::UTC_TIME_MS),
    ("TimeNanos", field::TIME_NANOS),
    ("Svid", field::SV_ID),
    ("ConstellationType", field::CONSTELLATION),
    ("Cn0DbHz", field::CN0),
    ("PseudorangeRateMetersPerSecond", field::PR),
    ("PseudorangeRateUncertaintyMetersPerSecond", field::PRU),
    ("ReceivedSvTimeUncertaintyNanos", field::REC_SV_TU),
    ("AgcDb", field::AGC),
    ("State", field::STATE),
    ("AccumulatedDeltaRangeMeters", field::ADRNG),
    ("AccumulatedDeltaRangeUncertaintyMeters", field::ADRNG_U),
    ("BasebandCn0DbHz", field::BB_CN0),
];

const REQUIRED_COLUMNS: [&str; 9] = [
    "utcTimeMillis",
    "Svid",
    "ConstellationType",
    "Cn0DbHz",
    "PseudorangeRateMetersPerSecond",
    "PseudorangeRateUncertaintyMetersPerSecond",
    "ReceivedSvTimeUncertaintyNanos",
    "AgcDb",
    "State",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable stream: {0}")]
    UnreadableStream(#[from] std::io::Error),
    #[error("no usable `# Raw,` header (missing columns: {missing:?})")]
    HeaderMissing { missing: Vec<String> },
    #[error("feature `{0}` absent in every satellite of the epoch")]
    AllAbsent(&'static str),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("correlation threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("dataset CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("satellite fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParseDiagnostics {
    pub raw_lines: usize,
    pub accepted: usize,
    pub skipped: Vec<SkippedLine>,
    /// Line numbers whose pseudorange rate exceeded the plausibility limit.
    pub implausible_pr: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub measurements: Vec<Measurement>,
    pub diagnostics: ParseDiagnostics,
}

fn header_columns(line: &str) -> Option<Vec<String>> {
    let rest = line.strip_prefix('#')?.trim_start();
    if !rest.starts_with("Raw,") {
        return None;
    }
    Some(rest.split(',').map(|c| c.trim().to_string()).collect())
}

/// Parses a GnssLogger text log. Malformed `Raw` lines are skipped and
/// reported; they never abort the parse.
pub fn parse_gnss_log<R: BufRead>(mut reader: R) -> Result<ParsedLog, IngestError> {
    let mut out = ParsedLog::default();
    // column index -> canonical field
    let mut columns: Option<Vec<Option<&'static str>>> = None;
    let mut buf = Vec::new();
    let mut line_no = 0usize;

    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let bytes = buf.strip_suffix(b"\n").unwrap_or(&buf);
        let bytes = bytes.strip_suffix(b"\r").unwrap_or(bytes);

        if bytes.starts_with(b"#") {
            if columns.is_none() {
                if let Some(cols) = std::str::from_utf8(bytes).ok().and_then(header_columns) {
                    let missing: Vec<String> = REQUIRED_COLUMNS
                        .iter()
                        .filter(|r| !cols.iter().any(|c| c == *r))
                        .map(|r| r.to_string())
                        .collect();
                    if !missing.is_empty() {
                        return Err(IngestError::HeaderMissing { missing });
                    }
                    columns = Some(
                        cols.iter()
                            .map(|c| COLUMN_MAP.iter().find(|(name, _)| name == c).map(|(_, f)| *f))
                            .collect(),
                    );
                }
            }
            continue;
        }
        if !bytes.starts_with(b"Raw,") {
            continue;
        }
        out.diagnostics.raw_lines += 1;
        let Some(cols) = columns.as_ref() else {
            return Err(IngestError::HeaderMissing {
                missing: REQUIRED_COLUMNS.iter().map(|s| s.to_string()).collect(),
            });
        };
        let line = match std::str::from_utf8(bytes) {
            Ok(l) => l,
            Err(_) => {
                out.diagnostics.skipped.push(SkippedLine {
                    line: line_no,
                    reason: "invalid UTF-8".into(),
                });
                continue;
            }
        };
        let mut raw = BTreeMap::new();
        for (value, name) in line.split(',').zip(cols.iter()) {
            if let Some(name) = name {
                raw.insert(*name, value);
            }
        }
        match validate_measurement(&raw) {
            Ok(m) => {
                if m.pr_implausible() {
                    out.diagnostics.implausible_pr.push(line_no);
                }
                out.diagnostics.accepted += 1;
                out.measurements.push(m);
            }
            Err(e) => out.diagnostics.skipped.push(SkippedLine {
                line: line_no,
                reason: e.to_string(),
            }),
        }
    }
    if out.diagnostics.raw_lines > 0 && columns.is_none() {
        return Err(IngestError::HeaderMissing {
            missing: REQUIRED_COLUMNS.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(out)
}

const LOG_COLUMNS: [&str; 17] = [
    "utcTimeMillis",
    "TimeNanos",
    "Svid",
    "TimeOffsetNanos",
    "State",
    "ReceivedSvTimeNanos",
    "ReceivedSvTimeUncertaintyNanos",
    "Cn0DbHz",
    "PseudorangeRateMetersPerSecond",
    "PseudorangeRateUncertaintyMetersPerSecond",
    "AccumulatedDeltaRangeState",
    "AccumulatedDeltaRangeMeters",
    "AccumulatedDeltaRangeUncertaintyMeters",
    "CarrierFrequencyHz",
    "ConstellationType",
    "AgcDb",
    "BasebandCn0DbHz",
];

/// Writes measurements in the GnssLogger dialect (a `Raw` subset).
pub fn write_gnss_log<W: Write>(ms: &[Measurement], comment: &str, mut w: W) -> std::io::Result<()> {
    for line in comment.lines() {
        writeln!(w, "# {}", line)?;
    }
    writeln!(w, "#")?;
    writeln!(w, "# Raw,{}", LOG_COLUMNS.join(","))?;
    writeln!(w, "#")?;
    let opt = |v: Option<f64>| v.map(fmt_sig9).unwrap_or_default();
    for m in ms {
        let adr_state = if m.adrng.is_some() { "1" } else { "0" };
        writeln!(
            w,
            "Raw,{},{},{},0,{},,{},{},{},{},{},{},{},1575420030,{},{},{}",
            m.utc_time_ms,
            m.time_nanos.map(|t| t.to_string()).unwrap_or_default(),
            m.sv_id,
            m.state,
            fmt_sig9(m.rec_sv_tu),
            fmt_sig9(m.cn0),
            fmt_sig9(m.pr),
            fmt_sig9(m.pru),
            adr_state,
            opt(m.adrng),
            opt(m.adrng_u),
            m.constellation.code(),
            fmt_sig9(m.agc),
            opt(m.bb_cn0),
        )?;
    }
    Ok(())
}

/// Keeps a seeded random `fraction` of the distinct satellites in the log.
pub fn filter_satellites(ms: &[Measurement], fraction: f64, seed: u64) -> Result<Vec<Measurement>, IngestError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(IngestError::InvalidFraction(fraction));
    }
    let mut sats: Vec<_> = ms
        .iter()
        .map(|m| (m.constellation, m.sv_id))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let keep = ((sats.len() as f64 * fraction).round() as usize).max(1);
    sats.shuffle(&mut seed::rng(seed));
    let kept: BTreeSet<_> = sats.into_iter().take(keep).collect();
    Ok(ms
        .iter()
        .filter(|m| kept.contains(&(m.constellation, m.sv_id)))
        .cloned()
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationPolicy {
    Zero,
    #[default]
    DatasetMean,
    Reject,
}

/// Concrete fill rule for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum Imputation {
    Zero,
    Values([f64; N_FEATURES]),
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; N_FEATURES],
    pub epoch_time_ms: i64,
    pub provenance: String,
    /// Entries filled in by imputation rather than measured.
    pub imputed: [bool; N_FEATURES],
}

fn aggregate(mut xs: Vec<f64>, agg: Aggregation) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    Some(match agg {
        Aggregation::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
        Aggregation::Median => {
            xs.sort_by(f64::total_cmp);
            let n = xs.len();
            if n % 2 == 1 {
                xs[n / 2]
            } else {
                0.5 * (xs[n / 2 - 1] + xs[n / 2])
            }
        }
    })
}

/// Per-feature aggregate over an epoch's satellites; `None` where no satellite
/// reports the parameter.
pub fn epoch_summary(e: &Epoch, agg: Aggregation) -> [Option<f64>; N_FEATURES] {
    let ms = &e.measurements;
    let col = |f: &dyn Fn(&Measurement) -> Option<f64>| aggregate(ms.iter().filter_map(f).collect(), agg);
    let ambiguous = ms.iter().filter(|m| m.has_flag(StateFlag::MSEC_AMBIGUOUS)).count();
    [
        col(&|m| Some(m.pr)),
        col(&|m| Some(m.pru)),
        col(&|m| Some(m.rec_sv_tu)),
        col(&|m| m.adrng),
        col(&|m| m.adrng_u),
        col(&|m| Some(m.cn0)),
        col(&|m| Some(m.agc)),
        (!ms.is_empty()).then(|| ambiguous as f64 / ms.len() as f64),
    ]
}

fn fill(
    summary: [Option<f64>; N_FEATURES],
    imputation: &Imputation,
    epoch_time_ms: i64,
    provenance: &str,
) -> Result<FeatureVector, IngestError> {
    let mut values = [0.0; N_FEATURES];
    let mut imputed = [false; N_FEATURES];
    for (j, s) in summary.iter().enumerate() {
        values[j] = match (s, imputation) {
            (Some(v), _) => *v,
            (None, Imputation::Reject) => return Err(IngestError::AllAbsent(FEATURE_NAMES[j])),
            (None, Imputation::Zero) => {
                imputed[j] = true;
                0.0
            }
            (None, Imputation::Values(v)) => {
                imputed[j] = true;
                v[j]
            }
        };
    }
    Ok(FeatureVector {
        values,
        epoch_time_ms,
        provenance: provenance.to_string(),
        imputed,
    })
}

/// Mean-aggregated feature vector of one epoch.
pub fn epoch_features(e: &Epoch, imputation: &Imputation) -> Result<FeatureVector, IngestError> {
    epoch_features_with(e, imputation, Aggregation::Mean, "")
}

pub fn epoch_features_with(
    e: &Epoch,
    imputation: &Imputation,
    agg: Aggregation,
    provenance: &str,
) -> Result<FeatureVector, IngestError> {
    fill(epoch_summary(e, agg), imputation, e.utc_time_ms, provenance)
}

/// Feature vectors for a whole recording. `DatasetMean` fills gaps with the
/// mean over epochs that do report the parameter, or 0 when none do.
pub fn extract_features(
    epochs: &[Epoch],
    policy: ImputationPolicy,
    agg: Aggregation,
    provenance: &str,
) -> Result<Vec<FeatureVector>, IngestError> {
    let summaries: Vec<_> = epochs.iter().map(|e| (e.utc_time_ms, epoch_summary(e, agg))).collect();
    let imputation = match policy {
        ImputationPolicy::Zero => Imputation::Zero,
        ImputationPolicy::Reject => Imputation::Reject,
        ImputationPolicy::DatasetMean => {
            let mut means = [0.0; N_FEATURES];
            for (j, m) in means.iter_mut().enumerate() {
                let present: Vec<f64> = summaries.iter().filter_map(|(_, s)| s[j]).collect();
                if !present.is_empty() {
                    *m = present.iter().sum::<f64>() / present.len() as f64;
                }
            }
            Imputation::Values(means)
        }
    };
    summaries
        .into_iter()
        .map(|(t, s)| fill(s, &imputation, t, provenance))
        .collect()
}

/// Rows of features with class labels. Rows are kept in recording order so
/// that time-series filters can run over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<LabeledDataset, IngestError> {
        if rows.len() != labels.len() {
            return Err(IngestError::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != feature_names.len()) {
            return Err(IngestError::InvalidDataset(format!(
                "row of width {} for {} features",
                r.len(),
                feature_names.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(IngestError::InvalidDataset(format!("label {l} without a class name")));
        }
        Ok(LabeledDataset {
            feature_names,
            rows,
            labels,
            class_names,
        })
    }

    /// Concatenates per-class recordings; class ids follow `classes` order.
    pub fn from_feature_vectors(classes: &[(String, Vec<FeatureVector>)]) -> LabeledDataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, (_, fvs)) in classes.iter().enumerate() {
            for fv in fvs {
                rows.push(fv.values.to_vec());
                labels.push(c);
            }
        }
        LabeledDataset {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            rows,
            labels,
            class_names: classes.iter().map(|(n, _)| n.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn with_rows(&self, rows: Vec<Vec<f64>>, feature_names: Vec<String>) -> LabeledDataset {
        LabeledDataset {
            feature_names,
            rows,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn select_columns(&self, keep: &[usize]) -> LabeledDataset {
        self.with_rows(
            self.rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect(),
            keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
        )
    }

    /// Maximal runs of consecutive rows sharing a label: one recording each.
    pub fn segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.labels.len() {
            if i == self.labels.len() || self.labels[i] != self.labels[start] {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},label", self.feature_names.join(","))?;
        for (row, &l) in self.rows.iter().zip(&self.labels) {
            for v in row {
                write!(w, "{},", fmt_sig9(*v))?;
            }
            writeln!(w, "{}", self.class_names[l])?;
        }
        Ok(())
    }

    /// Reads the dataset CSV. Class ids are assigned in sorted name order so
    /// that separately written train/test files agree.
    pub fn read_csv<R: BufRead>(r: R) -> Result<LabeledDataset, IngestError> {
        let mut lines = r.lines().enumerate();
        let header = loop {
            match lines.next() {
                None => return Err(IngestError::Csv { line: 1, message: "empty file".into() }),
                Some((_, l)) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
            }
        };
        let cols: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if cols.last().map(|s| s.as_str()) != Some("label") || cols.len() < 2 {
            return Err(IngestError::Csv {
                line: 1,
                message: "last column must be `label`".into(),
            });
        }
        let d = cols.len() - 1;
        let mut rows = Vec::new();
        let mut names = Vec::new();
        for (i, l) in lines {
            let l = l?;
            if l.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != d + 1 {
                return Err(IngestError::Csv {
                    line: i + 1,
                    message: format!("expected {} fields, got {}", d + 1, fields.len()),
                });
            }
            let row = fields[..d]
                .iter()
                .map(|f| f.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| IngestError::Csv {
                    line: i + 1,
                    message: "non-numeric feature".into(),
                })?;
            rows.push(row);
            names.push(fields[d].trim().to_string());
        }
        let class_names: Vec<String> = names.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let labels = names
            .iter()
            .map(|n| class_names.binary_search(n).expect("name collected above"))
            .collect();
        LabeledDataset::new(cols[..d].to_vec(), rows, labels, class_names)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub feature_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.feature_names.iter().position(|n| n == a)?;
        let j = self.feature_names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }
}

/// Pearson correlation of every feature pair. A zero-variance feature gets a
/// zero row and column with a unit diagonal.
pub fn correlation_matrix(ds: &LabeledDataset) -> Result<CorrelationMatrix, IngestError> {
    let n = ds.len();
    if n < 2 {
        return Err(IngestError::TooFewRows { needed: 2, got: n });
    }
    let d = ds.dim();
    let means: Vec<f64> = (0..d)
        .map(|j| ds.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &ds.rows {
        for i in 0..d {
            let di = r[i] - means[i];
            for j in i..d {
                cov[i][j] += di * (r[j] - means[j]);
            }
        }
    }
    let mut values = vec![vec![0.0; d]; d];
    for i in 0..d {
        values[i][i] = 1.0;
        for j in i + 1..d {
            let denom = (cov[i][i] * cov[j][j]).sqrt();
            let c = if denom > 0.0 { (cov[i][j] / denom).clamp(-1.0, 1.0) } else { 0.0 };
            values[i][j] = c;
            values[j][i] = c;
        }
    }
    Ok(CorrelationMatrix {
        feature_names: ds.feature_names.clone(),
        values,
    })
}

/// Greedy scan in column order: for every kept feature, any later feature with
/// |corr| >= `threshold` is dropped.
pub fn drop_correlated(ds: &LabeledDataset, threshold: f64) -> Result<(LabeledDataset, Vec<String>), IngestError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(IngestError::InvalidThreshold(threshold));
    }
    let corr = correlation_matrix(ds)?;
    let d = ds.dim();
    let mut dropped = vec![false; d];
    for i in 0..d {
        if dropped[i] {
            continue;
        }
        for j in i + 1..d {
            if !dropped[j] && corr.values[i][j].abs() >= threshold {
                dropped[j] = true;
            }
        }
    }
    let keep: Vec<usize> = (0..d).filter(|&j| !dropped[j]).collect();
    let names = (0..d).filter(|&j| dropped[j]).map(|j| ds.feature_names[j].clone()).collect();
    Ok((ds.select_columns(&keep), names))
}

/// Nine-column epoch table (canonical eight plus `bb_cn0` after `cn0`), used
/// to reproduce the correlation screen that removes `bb_cn0`.
pub fn nine_feature_dataset(classes: &[(String, Vec<Epoch>)]) -> Result<LabeledDataset, IngestError> {
    let mut names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    names.insert(6, "bb_cn0".into());
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, (_, epochs)) in classes.iter().enumerate() {
        let fvs = extract_features(epochs, ImputationPolicy::DatasetMean, Aggregation::Mean, "")?;
        for (e, fv) in epochs.iter().zip(fvs) {
            let bb: Vec<f64> = e.measurements.iter().filter_map(|m| m.bb_cn0).collect();
            let bb = if bb.is_empty() { fv.values[5] } else { bb.iter().sum::<f64>() / bb.len() as f64 };
            let mut row = fv.values.to_vec();
            row.insert(6, bb);
            rows.push(row);
            labels.push(c);
        }
    }
    LabeledDataset::new(names, rows, labels, classes.iter().map(|(n, _)| n.clone()).collect())
}

/// Parses, groups and extracts features from one log in a single call.
pub fn log_to_features(
    ms: &[Measurement],
    policy: ImputationPolicy,
    agg: Aggregation,
    provenance: &str,
) -> Result<Vec<FeatureVector>, IngestError> {
    let epochs = gnss::group_into_epochs(ms).map_err(|_| IngestError::TooFewRows { needed: 1, got: 0 })?;
    extract_features(&epochs, policy, agg, provenance)
}
