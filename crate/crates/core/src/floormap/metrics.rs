//! Landmark (GDM) and shape (SDM) discrepancies between two maps.

use serde::{Deserialize, Serialize};

use super::align::{fit_rigid, Rigid2};
use super::hungarian::assign;
use super::{FloorMap, LandmarkClass, MapError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Registration {
    /// Compare coordinates as given.
    None,
    /// Move the map onto the reference with the best rigid fit first.
    #[default]
    RigidFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub max: f64,
    pub p90: f64,
    pub mean: f64,
}

impl Summary {
    pub fn of(d: &[f64]) -> Summary {
        if d.is_empty() {
            return Summary {
                count: 0,
                max: 0.0,
                p90: 0.0,
                mean: 0.0,
            };
        }
        let mut s = d.to_vec();
        s.sort_by(f64::total_cmp);
        // linear interpolation between closest ranks
        let pos = 0.9 * (s.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let p90 = s[lo] + (s[hi] - s[lo]) * (pos - lo as f64);
        Summary {
            count: s.len(),
            max: s[s.len() - 1],
            p90,
            mean: s.iter().sum::<f64>() / s.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub distances: Vec<f64>,
    pub summary: Summary,
    /// `(map landmark, reference landmark)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_map: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
    /// Transform applied to the map before measuring.
    pub transform: Rigid2,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Minimum-total-distance pairing within every landmark class.
fn correspond(a: &[[f64; 2]], a_cls: &[LandmarkClass], b: &[[f64; 2]], b_cls: &[LandmarkClass]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for class in LandmarkClass::ALL {
        let ia: Vec<usize> = (0..a.len()).filter(|&i| a_cls[i] == class).collect();
        let ib: Vec<usize> = (0..b.len()).filter(|&i| b_cls[i] == class).collect();
        if ia.is_empty() || ib.is_empty() {
            continue;
        }
        let cost: Vec<Vec<f64>> = ia.iter().map(|&i| ib.iter().map(|&j| dist(a[i], b[j])).collect()).collect();
        for (r, c) in assign(&cost).into_iter().enumerate() {
            if let Some(c) = c {
                out.push((ia[r], ib[c]));
            }
        }
    }
    out.sort_unstable();
    out
}

const HYPOTHESIS_GATE: f64 = 3.0;

/// Rigid transform taking `map` onto `truth`: the best landmark-pair
/// hypothesis (most same-class landmarks within 3 m, then smallest squared
/// error) refined by alternating class-wise assignment and least squares.
pub fn register(map: &FloorMap, truth: &FloorMap) -> Rigid2 {
    let a: Vec<[f64; 2]> = map.landmarks.iter().map(|l| l.xy).collect();
    let b: Vec<[f64; 2]> = truth.landmarks.iter().map(|l| l.xy).collect();
    let ac: Vec<LandmarkClass> = map.landmarks.iter().map(|l| l.class).collect();
    let bc: Vec<LandmarkClass> = truth.landmarks.iter().map(|l| l.class).collect();
    let score = |tf: &Rigid2| {
        let mut inliers = 0usize;
        let mut sse = 0.0;
        for (p, c) in a.iter().zip(&ac) {
            let q = tf.apply(*p);
            let best = b
                .iter()
                .zip(&bc)
                .filter(|(_, bc)| *bc == c)
                .map(|(r, _)| dist(q, *r))
                .fold(f64::INFINITY, f64::min);
            if best <= HYPOTHESIS_GATE {
                inliers += 1;
                sse += best * best;
            }
        }
        (inliers, sse)
    };
    let mut best: Option<(Rigid2, usize, f64)> = None;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let d = dist(a[i], a[j]);
            if d < 1e-9 {
                continue;
            }
            for k in 0..b.len() {
                if bc[k] != ac[i] {
                    continue;
                }
                for l in 0..b.len() {
                    if l == k || bc[l] != ac[j] || (dist(b[k], b[l]) - d).abs() > HYPOTHESIS_GATE {
                        continue;
                    }
                    let Some(tf) = fit_rigid(&[a[i], a[j]], &[b[k], b[l]]) else { continue };
                    let (n, sse) = score(&tf);
                    if best.as_ref().is_none_or(|(_, bn, bs)| n > *bn || (n == *bn && sse < *bs - 1e-12)) {
                        best = Some((tf, n, sse));
                    }
                }
            }
        }
    }
    let mut tf = match best {
        Some((tf, _, _)) => tf,
        None => {
            // fewer than two usable landmarks: match centroids of the pairs
            let pairs = correspond(&a, &ac, &b, &bc);
            let (s, d): (Vec<_>, Vec<_>) = pairs.iter().map(|&(i, j)| (a[i], b[j])).unzip();
            let mut t = fit_rigid(&s, &d).unwrap_or(Rigid2::IDENTITY);
            if s.len() < 2 {
                t.theta = 0.0;
                if let (Some(p), Some(q)) = (s.first(), d.first()) {
                    t.t = [q[0] - p[0], q[1] - p[1]];
                }
            }
            return t;
        }
    };
    let mut last: Vec<(usize, usize)> = Vec::new();
    for _ in 0..50 {
        let moved: Vec<[f64; 2]> = a.iter().map(|p| tf.apply(*p)).collect();
        let pairs = correspond(&moved, &ac, &b, &bc);
        if pairs == last || pairs.len() < 2 {
            break;
        }
        let (s, d): (Vec<_>, Vec<_>) = pairs.iter().map(|&(i, j)| (a[i], b[j])).unzip();
        match fit_rigid(&s, &d) {
            Some(t) => tf = t,
            None => break,
        }
        last = pairs;
    }
    tf
}

fn prepare(map: &FloorMap, truth: &FloorMap, reg: Registration) -> (Rigid2, Vec<[f64; 2]>, Vec<(usize, usize)>) {
    let tf = match reg {
        Registration::None => Rigid2::IDENTITY,
        Registration::RigidFit => register(map, truth),
    };
    let moved: Vec<[f64; 2]> = map
        .landmarks
        .iter()
        .map(|l| if reg == Registration::None { l.xy } else { tf.apply(l.xy) })
        .collect();
    let ac: Vec<LandmarkClass> = map.landmarks.iter().map(|l| l.class).collect();
    let b: Vec<[f64; 2]> = truth.landmarks.iter().map(|l| l.xy).collect();
    let bc: Vec<LandmarkClass> = truth.landmarks.iter().map(|l| l.class).collect();
    let pairs = correspond(&moved, &ac, &b, &bc);
    (tf, moved, pairs)
}

fn unmatched(n: usize, used: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut flag = vec![false; n];
    used.for_each(|i| flag[i] = true);
    (0..n).filter(|&i| !flag[i]).collect()
}

/// Distances between corresponding landmarks. Landmarks left without a
/// partner of their class are listed rather than treated as an error.
pub fn gdm(map: &FloorMap, truth: &FloorMap, reg: Registration) -> DiscrepancyReport {
    let (transform, moved, matches) = prepare(map, truth, reg);
    let distances: Vec<f64> = matches.iter().map(|&(i, j)| dist(moved[i], truth.landmarks[j].xy)).collect();
    DiscrepancyReport {
        summary: Summary::of(&distances),
        distances,
        unmatched_map: unmatched(map.landmarks.len(), matches.iter().map(|m| m.0)),
        unmatched_truth: unmatched(truth.landmarks.len(), matches.iter().map(|m| m.1)),
        matches,
        transform,
    }
}

/// Distances between corresponding points sampled uniformly along every
/// landmark edge of either map whose two ends are matched.
pub fn sdm(map: &FloorMap, truth: &FloorMap, samples_per_edge: usize, reg: Registration) -> Result<DiscrepancyReport, MapError> {
    if samples_per_edge < 2 {
        return Err(MapError::InvalidInput(format!("samples_per_edge must be at least 2, got {samples_per_edge}")));
    }
    let (transform, moved, matches) = prepare(map, truth, reg);
    let mut of_map = vec![None; map.landmarks.len()];
    let mut of_truth = vec![None; truth.landmarks.len()];
    for (k, &(i, j)) in matches.iter().enumerate() {
        of_map[i] = Some(k);
        of_truth[j] = Some(k);
    }
    let mut edges: Vec<(usize, usize)> = map
        .edges
        .iter()
        .filter_map(|&(a, b)| Some((of_map.get(a).copied().flatten()?, of_map.get(b).copied().flatten()?)))
        .chain(
            truth
                .edges
                .iter()
                .filter_map(|&(a, b)| Some((of_truth.get(a).copied().flatten()?, of_truth.get(b).copied().flatten()?))),
        )
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let mut distances = Vec::with_capacity(edges.len() * samples_per_edge);
    for (a, b) in edges {
        let (ma, mb) = (moved[matches[a].0], moved[matches[b].0]);
        let (ta, tb) = (truth.landmarks[matches[a].1].xy, truth.landmarks[matches[b].1].xy);
        for s in 0..samples_per_edge {
            let u = s as f64 / (samples_per_edge - 1) as f64;
            let lerp = |p: [f64; 2], q: [f64; 2]| [p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1])];
            distances.push(dist(lerp(ma, mb), lerp(ta, tb)));
        }
    }
    Ok(DiscrepancyReport {
        summary: Summary::of(&distances),
        distances,
        unmatched_map: unmatched(map.landmarks.len(), matches.iter().map(|m| m.0)),
        unmatched_truth: unmatched(truth.landmarks.len(), matches.iter().map(|m| m.1)),
        matches,
        transform,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Frame, MapLandmark};
    use super::*;

    fn truth() -> FloorMap {
        let l = |class, x, y| MapLandmark { class, xy: [x, y] };
        FloorMap {
            landmarks: vec![
                l(LandmarkClass::Lift, 0.0, 0.0),
                l(LandmarkClass::Room, 8.0, 0.0),
                l(LandmarkClass::Corner, 30.0, 0.0),
                l(LandmarkClass::Stairs, 30.0, 12.0),
                l(LandmarkClass::Lift, 30.0, 25.0),
                l(LandmarkClass::Room, 0.0, 12.0),
            ],
            edges: vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 5)],
            paths: Vec::new(),
            frame: Frame::World,
        }
    }

    #[test]
    fn identical_maps_are_exactly_zero() {
        let t = truth();
        for reg in [Registration::None, Registration::RigidFit] {
            let g = gdm(&t, &t, reg);
            assert!(g.distances.iter().all(|&d| d == 0.0));
            assert_eq!(g.summary.max, 0.0);
            let s = sdm(&t, &t, 5, reg).unwrap();
            assert!(s.distances.iter().all(|&d| d == 0.0));
            assert_eq!(s.distances.len(), 25);
        }
    }

    #[test]
    fn shifted_and_rotated_copy_registers_to_zero() {
        let t = truth();
        let moved = t.transformed(&Rigid2::new(1.0, [1.0, 0.0]));
        let g = gdm(&moved, &t, Registration::RigidFit);
        assert!(g.summary.max < 1e-9, "{:?}", g.summary);
        let plain = gdm(&moved, &t, Registration::None);
        assert!(plain.summary.max > 1.0);
    }

    #[test]
    fn one_displaced_landmark() {
        let t = truth();
        let mut m = t.clone();
        m.landmarks[3].xy[0] += 2.0;
        let s = sdm(&m, &t, 11, Registration::None).unwrap();
        assert!((s.summary.max - 2.0).abs() < 1e-12);
        let g = gdm(&m, &t, Registration::None);
        assert!((g.summary.max - 2.0).abs() < 1e-12);
        // halfway along the edge from the corner the gap is half as large
        assert!(s.distances.iter().any(|&d| (d - 1.0).abs() < 1e-12));
        assert!(s.summary.max <= g.summary.max + 1e-9);
    }

    #[test]
    fn swap_symmetry() {
        let t = truth();
        let mut m = t.transformed(&Rigid2::new(-0.4, [3.0, 7.0]));
        m.landmarks[1].xy[0] += 0.8;
        m.landmarks[4].xy[1] -= 0.5;
        let ab = gdm(&m, &t, Registration::RigidFit);
        let ba = gdm(&t, &m, Registration::RigidFit);
        let mut x = ab.distances.clone();
        let mut y = ba.distances.clone();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn unmatched_are_reported() {
        let t = truth();
        let mut m = t.clone();
        m.landmarks.push(MapLandmark {
            class: LandmarkClass::Stairs,
            xy: [5.0, 5.0],
        });
        let g = gdm(&m, &t, Registration::None);
        assert_eq!(g.unmatched_map, vec![6]);
        assert!(g.unmatched_truth.is_empty());
        assert_eq!(g.distances.len(), 6);
    }

    #[test]
    fn p90_interpolates() {
        let s = Summary::of(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        assert_eq!(s.p90, 9.0);
        assert_eq!(Summary::of(&[1.0, 2.0]).p90, 1.9);
    }

    #[test]
    fn too_few_samples() {
        assert!(sdm(&truth(), &truth(), 1, Registration::None).is_err());
    }
}
