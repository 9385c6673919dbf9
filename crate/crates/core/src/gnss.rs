//! Semi-processed GNSS measurement model.
//!
//! A [`Measurement`] holds the nine per-satellite parameters the pipeline keeps
//! out of the Android `GnssMeasurement` record. Optional fields are `None` when a
//! chipset does not report them (several Snapdragon parts never expose the
//! accumulated delta range); nothing is zero-filled at this layer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Carrier-to-noise density bounds, dB-Hz.
pub const CN0_MIN: f64 = 0.0;
pub const CN0_MAX: f64 = 63.0;

/// Pseudorange rates beyond this magnitude are physically implausible for a
/// handheld receiver. Diagnostic only.
pub const PR_PLAUSIBLE_LIMIT: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constellation {
    Unknown,
    Gps,
    Sbas,
    Glonass,
    Qzss,
    Beidou,
    Galileo,
    Irnss,
}

impl Constellation {
    /// Android `GnssStatus.CONSTELLATION_*` code.
    pub fn from_code(code: i64) -> Constellation {
        match code {
            1 => Constellation::Gps,
            2 => Constellation::Sbas,
            3 => Constellation::Glonass,
            4 => Constellation::Qzss,
            5 => Constellation::Beidou,
            6 => Constellation::Galileo,
            7 => Constellation::Irnss,
            _ => Constellation::Unknown,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            Constellation::Unknown => 0,
            Constellation::Gps => 1,
            Constellation::Sbas => 2,
            Constellation::Glonass => 3,
            Constellation::Qzss => 4,
            Constellation::Beidou => 5,
            Constellation::Galileo => 6,
            Constellation::Irnss => 7,
        }
    }
}

/// Receiver synchronization-state bits (`GnssMeasurement.STATE_*`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateFlag(pub u32);

impl StateFlag {
    pub const CODE_LOCK: StateFlag = StateFlag(1);
    pub const BIT_SYNC: StateFlag = StateFlag(2);
    pub const SUBFRAME_SYNC: StateFlag = StateFlag(4);
    pub const TOW_DECODED: StateFlag = StateFlag(8);
    /// Millisecond ambiguity, typically from multipath.
    pub const MSEC_AMBIGUOUS: StateFlag = StateFlag(16);
    pub const SYMBOL_SYNC: StateFlag = StateFlag(32);
    pub const GLO_STRING_SYNC: StateFlag = StateFlag(64);
    pub const GLO_TOD_DECODED: StateFlag = StateFlag(128);
    pub const BDS_D2_BIT_SYNC: StateFlag = StateFlag(256);
    pub const BDS_D2_SUBFRAME_SYNC: StateFlag = StateFlag(512);
    pub const GAL_E1BC_CODE_LOCK: StateFlag = StateFlag(1024);
    pub const GAL_E1C_2ND_CODE_LOCK: StateFlag = StateFlag(2048);
    pub const GAL_E1B_PAGE_SYNC: StateFlag = StateFlag(4096);
    pub const SBAS_SYNC: StateFlag = StateFlag(8192);
    pub const TOW_KNOWN: StateFlag = StateFlag(16384);
    pub const GLO_TOD_KNOWN: StateFlag = StateFlag(32768);
    pub const SECOND_CODE_LOCK: StateFlag = StateFlag(65536);

    pub const ALL: [StateFlag; 17] = [
        Self::CODE_LOCK,
        Self::BIT_SYNC,
        Self::SUBFRAME_SYNC,
        Self::TOW_DECODED,
        Self::MSEC_AMBIGUOUS,
        Self::SYMBOL_SYNC,
        Self::GLO_STRING_SYNC,
        Self::GLO_TOD_DECODED,
        Self::BDS_D2_BIT_SYNC,
        Self::BDS_D2_SUBFRAME_SYNC,
        Self::GAL_E1BC_CODE_LOCK,
        Self::GAL_E1C_2ND_CODE_LOCK,
        Self::GAL_E1B_PAGE_SYNC,
        Self::SBAS_SYNC,
        Self::TOW_KNOWN,
        Self::GLO_TOD_KNOWN,
        Self::SECOND_CODE_LOCK,
    ];
}

pub fn state_has_flag(state: u32, flag: StateFlag) -> bool {
    state & flag.0 != 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub utc_time_ms: i64,
    /// Receiver `TimeNanos`, carried through untouched.
    pub time_nanos: Option<i64>,
    pub sv_id: u32,
    pub constellation: Constellation,
    /// Pseudorange rate, m/s.
    pub pr: f64,
    /// Pseudorange-rate uncertainty (1-sigma), m/s.
    pub pru: f64,
    /// Received SV time uncertainty (1-sigma), ns.
    pub rec_sv_tu: f64,
    /// Accumulated delta range, m.
    pub adrng: Option<f64>,
    /// Accumulated delta range uncertainty (1-sigma), m.
    pub adrng_u: Option<f64>,
    /// Carrier-to-noise density, dB-Hz.
    pub cn0: f64,
    /// Baseband carrier-to-noise density, dB-Hz.
    pub bb_cn0: Option<f64>,
    /// AGC level, dB.
    pub agc: f64,
    pub state: u32,
}

impl Measurement {
    pub fn has_flag(&self, flag: StateFlag) -> bool {
        state_has_flag(self.state, flag)
    }

    pub fn pr_implausible(&self) -> bool {
        self.pr.abs() > PR_PLAUSIBLE_LIMIT
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` is not a valid number: {value:?}")]
    Unparsable { field: &'static str, value: String },
    #[error("field `{field}` out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
}

/// Canonical field names accepted by [`validate_measurement`].
pub mod field {
    pub const UTC_TIME_MS: &str = "utc_time_ms";
    pub const TIME_NANOS: &str = "time_nanos";
    pub const SV_ID: &str = "sv_id";
    pub const CONSTELLATION: &str = "constellation";
    pub const PR: &str = "pr";
    pub const PRU: &str = "pru";
    pub const REC_SV_TU: &str = "rec_sv_tu";
    pub const ADRNG: &str = "adrng";
    pub const ADRNG_U: &str = "adrng_u";
    pub const CN0: &str = "cn0";
    pub const BB_CN0: &str = "bb_cn0";
    pub const AGC: &str = "agc";
    pub const STATE: &str = "state";
}

type Fields<'a> = BTreeMap<&'a str, &'a str>;

fn text<'a>(raw: &Fields<'a>, name: &'static str) -> Option<&'a str> {
    raw.get(name).map(|s| s.trim()).filter(|s| !s.is_empty())
}

fn real(raw: &Fields<'_>, name: &'static str) -> Result<Option<f64>, ValidationError> {
    match text(raw, name) {
        None => Ok(None),
        Some(s) => match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(ValidationError::Unparsable {
                field: name,
                value: s.to_string(),
            }),
        },
    }
}

fn required_real(raw: &Fields<'_>, name: &'static str) -> Result<f64, ValidationError> {
    real(raw, name)?.ok_or(ValidationError::MissingField(name))
}

/// Integer field; accepts `"16"` as well as float text like `"16.0"`.
fn integer(raw: &Fields<'_>, name: &'static str) -> Result<Option<i64>, ValidationError> {
    let Some(s) = text(raw, name) else {
        return Ok(None);
    };
    if let Ok(v) = s.parse::<i64>() {
        return Ok(Some(v));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e18 => Ok(Some(v as i64)),
        _ => Err(ValidationError::Unparsable {
            field: name,
            value: s.to_string(),
        }),
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<f64, ValidationError> {
    if v < 0.0 {
        Err(ValidationError::OutOfRange { field: name, value: v })
    } else {
        Ok(v)
    }
}

/// Builds a [`Measurement`] from a map of canonical field names to text values.
///
/// Empty values count as absent. Required: `utc_time_ms`, `sv_id`, `cn0`, `pr`,
/// `pru`, `rec_sv_tu`, `agc`, `state`. A missing `constellation` is `Unknown`.
pub fn validate_measurement(raw: &BTreeMap<&str, &str>) -> Result<Measurement, ValidationError> {
    use field::*;

    let utc_time_ms = integer(raw, UTC_TIME_MS)?.ok_or(ValidationError::MissingField(UTC_TIME_MS))?;
    if utc_time_ms <= 0 {
        return Err(ValidationError::OutOfRange {
            field: UTC_TIME_MS,
            value: utc_time_ms as f64,
        });
    }
    let sv_id = integer(raw, SV_ID)?.ok_or(ValidationError::MissingField(SV_ID))?;
    if sv_id < 1 || sv_id > u32::MAX as i64 {
        return Err(ValidationError::OutOfRange {
            field: SV_ID,
            value: sv_id as f64,
        });
    }
    let cn0 = required_real(raw, CN0)?;
    if !(CN0_MIN..=CN0_MAX).contains(&cn0) {
        return Err(ValidationError::OutOfRange { field: CN0, value: cn0 });
    }
    let pr = required_real(raw, PR)?;
    let pru = non_negative(PRU, required_real(raw, PRU)?)?;
    let rec_sv_tu = non_negative(REC_SV_TU, required_real(raw, REC_SV_TU)?)?;
    let agc = required_real(raw, AGC)?;
    let state = integer(raw, STATE)?.ok_or(ValidationError::MissingField(STATE))?;
    if state < 0 || state > u32::MAX as i64 {
        return Err(ValidationError::OutOfRange {
            field: STATE,
            value: state as f64,
        });
    }
    let adrng = real(raw, ADRNG)?;
    let adrng_u = real(raw, ADRNG_U)?.map(|v| non_negative(ADRNG_U, v)).transpose()?;
    let bb_cn0 = real(raw, BB_CN0)?;
    let constellation = integer(raw, CONSTELLATION)?
        .map(Constellation::from_code)
        .unwrap_or(Constellation::Unknown);
    let time_nanos = integer(raw, TIME_NANOS).ok().flatten();

    Ok(Measurement {
        utc_time_ms,
        time_nanos,
        sv_id: sv_id as u32,
        constellation,
        pr,
        pru,
        rec_sv_tu,
        adrng,
        adrng_u,
        cn0,
        bb_cn0,
        agc,
        state: state as u32,
    })
}

/// All satellite measurements sharing one receiver timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub utc_time_ms: i64,
    pub measurements: Vec<Measurement>,
    pub unique_sv_count: usize,
}

impl Epoch {
    fn new(utc_time_ms: i64, measurements: Vec<Measurement>) -> Epoch {
        let unique_sv_count = measurements
            .iter()
            .map(|m| (m.sv_id, m.constellation))
            .collect::<BTreeSet<_>>()
            .len();
        Epoch {
            utc_time_ms,
            measurements,
            unique_sv_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EpochError {
    #[error("no measurements to group")]
    EmptyInput,
}

/// Partitions measurements into epochs keyed by `utc_time_ms`, in time order.
/// Within an epoch the input order is kept (the sort is stable).
pub fn group_into_epochs(ms: &[Measurement]) -> Result<Vec<Epoch>, EpochError> {
    if ms.is_empty() {
        return Err(EpochError::EmptyInput);
    }
    let mut sorted: Vec<&Measurement> = ms.iter().collect();
    sorted.sort_by_key(|m| m.utc_time_ms);

    let mut epochs = Vec::new();
    let mut current: Vec<Measurement> = Vec::new();
    let mut t = sorted[0].utc_time_ms;
    for m in sorted {
        if m.utc_time_ms != t {
            epochs.push(Epoch::new(t, std::mem::take(&mut current)));
            t = m.utc_time_ms;
        }
        current.push(m.clone());
    }
    epochs.push(Epoch::new(t, current));
    Ok(epochs)
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> BTreeMap<&'static str, &'static str> {
        BTreeMap::from([
            ("utc_time_ms", "1700000000000"),
            ("sv_id", "12"),
            ("constellation", "1"),
            ("cn0", "45.0"),
            ("pr", "-120.5"),
            ("pru", "0.05"),
            ("rec_sv_tu", "12"),
            ("adrng", "1532.1"),
            ("adrng_u", "0.003"),
            ("bb_cn0", "41.0"),
            ("agc", "3.2"),
            ("state", "16431"),
        ])
    }

    #[test]
    fn accepts_mid_range_cn0() {
        let m = validate_measurement(&base()).unwrap();
        assert_eq!(m.cn0, 45.0);
        assert_eq!(m.constellation, Constellation::Gps);
        assert_eq!(m.adrng, Some(1532.1));
    }

    #[test]
    fn rejects_cn0_above_63() {
        let mut raw = base();
        raw.insert("cn0", "64.0");
        assert_eq!(
            validate_measurement(&raw),
            Err(ValidationError::OutOfRange { field: "cn0", value: 64.0 })
        );
        raw.insert("cn0", "-0.5");
        assert!(matches!(
            validate_measurement(&raw),
            Err(ValidationError::OutOfRange { field: "cn0", .. })
        ));
        raw.insert("cn0", "63");
        assert!(validate_measurement(&raw).is_ok());
    }

    #[test]
    fn absent_adrng_is_none() {
        let mut raw = base();
        raw.remove("adrng");
        raw.insert("adrng_u", "");
        let m = validate_measurement(&raw).unwrap();
        assert_eq!(m.adrng, None);
        assert_eq!(m.adrng_u, None);
    }

    #[test]
    fn missing_required_field() {
        for name in ["utc_time_ms", "sv_id", "cn0", "pr", "pru", "rec_sv_tu", "agc", "state"] {
            let mut raw = base();
            raw.remove(name);
            match validate_measurement(&raw) {
                Err(ValidationError::MissingField(f)) => assert_eq!(f, name),
                other => panic!("{name}: {other:?}"),
            }
        }
    }

    #[test]
    fn range_checks() {
        for (k, v) in [("pru", "-1"), ("rec_sv_tu", "-3"), ("adrng_u", "-0.1"), ("sv_id", "0"), ("utc_time_ms", "0"), ("state", "-1")] {
            let mut raw = base();
            raw.insert(k, v);
            assert!(
                matches!(validate_measurement(&raw), Err(ValidationError::OutOfRange { .. })),
                "{k}={v}"
            );
        }
        let mut raw = base();
        raw.insert("pr", "nan");
        assert!(matches!(validate_measurement(&raw), Err(ValidationError::Unparsable { .. })));
    }

    #[test]
    fn implausible_pr_is_only_flagged() {
        let mut raw = base();
        raw.insert("pr", "25000");
        let m = validate_measurement(&raw).unwrap();
        assert!(m.pr_implausible());
    }

    #[test]
    fn flag_checks() {
        assert!(state_has_flag(16, StateFlag::MSEC_AMBIGUOUS));
        assert!(!state_has_flag(0, StateFlag::MSEC_AMBIGUOUS));
        assert!(state_has_flag(17, StateFlag::MSEC_AMBIGUOUS));
        for (i, a) in StateFlag::ALL.iter().enumerate() {
            assert!(a.0.is_power_of_two());
            for b in &StateFlag::ALL[i + 1..] {
                assert_ne!(a.0, b.0);
            }
        }
    }

    fn meas(t: i64, sv: u32) -> Measurement {
        Measurement {
            utc_time_ms: t,
            time_nanos: None,
            sv_id: sv,
            constellation: Constellation::Gps,
            pr: 0.0,
            pru: 0.1,
            rec_sv_tu: 10.0,
            adrng: None,
            adrng_u: None,
            cn0: 40.0,
            bb_cn0: None,
            agc: 1.0,
            state: 0,
        }
    }

    #[test]
    fn grouping_examples() {
        let ms: Vec<_> = (0..6).map(|i| meas(1000 + (i / 3) * 1000, i as u32 + 1)).collect();
        let e = group_into_epochs(&ms).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].measurements.len(), 3);
        assert_eq!(e[1].measurements.len(), 3);
        assert_eq!(e[0].unique_sv_count, 3);

        assert_eq!(group_into_epochs(&ms[..1]).unwrap().len(), 1);
        assert_eq!(group_into_epochs(&[]), Err(EpochError::EmptyInput));
    }

    proptest! {
        #[test]
        fn flag_idempotent(s in any::<u32>(), bit in 0usize..17) {
            let f = StateFlag::ALL[bit];
            prop_assert!(state_has_flag(s | f.0, f));
            prop_assert!(state_has_flag(f.0, f));
        }

        #[test]
        fn grouping_is_partition(ts in proptest::collection::vec((1i64..20, 1u32..5), 1..80)) {
            let ms: Vec<_> = ts.iter().map(|&(t, sv)| meas(t, sv)).collect();
            let epochs = group_into_epochs(&ms).unwrap();
            let total: usize = epochs.iter().map(|e| e.measurements.len()).sum();
            prop_assert_eq!(total, ms.len());
            for w in epochs.windows(2) {
                prop_assert!(w[0].utc_time_ms < w[1].utc_time_ms);
            }
            for e in &epochs {
                prop_assert!(e.measurements.iter().all(|m| m.utc_time_ms == e.utc_time_ms));
                prop_assert!(e.unique_sv_count >= 1);
            }
            // sort-then-group oracle
            let mut sorted = ms.clone();
            sorted.sort_by_key(|m| m.utc_time_ms);
            let again = group_into_epochs(&sorted).unwrap();
            prop_assert_eq!(epochs, again);
        }

        #[test]
        fn validation_is_total(vals in proptest::collection::vec(".{0,8}", 12)) {
            let keys = ["utc_time_ms", "sv_id", "constellation", "cn0", "pr", "pru", "rec_sv_tu", "adrng", "adrng_u", "bb_cn0", "agc", "state"];
            let raw: BTreeMap<&str, &str> = keys.iter().copied().zip(vals.iter().map(|s| s.as_str())).collect();
            let _ = validate_measurement(&raw);
        }
    }
}
