//! Satellite-receiver geometry and the two pseudorange formulas.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::seed::Rng;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const EARTH_RADIUS: f64 = 6_371_000.0;
/// Nominal orbit height above the surface.
pub const ORBIT_HEIGHT: f64 = 2.0e7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteGeometry {
    pub sat_pos: [f64; 3],
    pub rx_pos: [f64; 3],
    /// Receiver clock skew, s.
    pub clock_skew: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pseudorange {
    /// From signal timing: `(t_s - t_r + Δ)·c`.
    pub timing: f64,
    /// Straight-line distance between the two positions.
    pub euclidean: f64,
}

impl SatelliteGeometry {
    pub fn euclidean_range(&self) -> f64 {
        self.sat_pos
            .iter()
            .zip(&self.rx_pos)
            .map(|(s, r)| (s - r) * (s - r))
            .sum::<f64>()
            .sqrt()
    }

    /// Clock skew that makes the timing range equal the geometric one.
    pub fn consistent_skew(&self, t_s: f64, t_r: f64) -> f64 {
        self.euclidean_range() / SPEED_OF_LIGHT - t_s + t_r
    }
}

pub fn pseudorange(g: &SatelliteGeometry, t_s: f64, t_r: f64) -> Result<Pseudorange, SynthError> {
    if !(t_r >= t_s - 1.0) {
        return Err(SynthError::InvalidSpec(format!("receive time {t_r} precedes send time {t_s} by over 1 s")));
    }
    let timing = (t_s - t_r + g.clock_skew) * SPEED_OF_LIGHT;
    if timing < 0.0 {
        return Err(SynthError::NonPhysical(timing));
    }
    Ok(Pseudorange {
        timing,
        euclidean: g.euclidean_range(),
    })
}

/// Receiver on the surface, satellite at orbit height somewhere above the
/// local horizon, and the skew that makes both ranges agree. Returns the
/// geometry with its send and receive times.
pub fn random_geometry(rng: &mut Rng) -> (SatelliteGeometry, f64, f64) {
    let unit = |rng: &mut Rng| loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    };
    let up = unit(rng);
    let rx_pos = up.map(|u| u * EARTH_RADIUS);
    let sat_dir = loop {
        let d = unit(rng);
        if d.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>() > 0.3 {
            break d;
        }
    };
    let sat_pos = sat_dir.map(|u| u * (EARTH_RADIUS + ORBIT_HEIGHT));
    // Times within one second keep the timing formula at nanometre precision.
    let t_s = rng.random_range(0.0..1.0);
    let t_r = t_s + rng.random_range(0.06..0.09);
    let mut g = SatelliteGeometry {
        sat_pos,
        rx_pos,
        clock_skew: 0.0,
    };
    g.clock_skew = g.consistent_skew(t_s, t_r);
    (g, t_s, t_r)
}
