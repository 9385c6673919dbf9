//! Rigid alignment of trajectories on shared activity landmarks.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{LandmarkClass, MapError, MapLandmark, Trajectory};

/// Planar rotation by `theta` followed by translation `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rigid2 {
    pub theta: f64,
    pub t: [f64; 2],
}

impl Rigid2 {
    pub const IDENTITY: Rigid2 = Rigid2 { theta: 0.0, t: [0.0, 0.0] };

    pub fn new(theta: f64, t: [f64; 2]) -> Rigid2 {
        Rigid2 { theta, t }
    }

    pub fn rotate(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c * p[0] - s * p[1], s * p[0] + c * p[1]]
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let r = self.rotate(p);
        [r[0] + self.t[0], r[1] + self.t[1]]
    }

    pub fn inverse(&self) -> Rigid2 {
        let inv = Rigid2::new(-self.theta, [0.0, 0.0]);
        let t = inv.rotate(self.t);
        Rigid2::new(-self.theta, [-t[0], -t[1]])
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Rigid2) -> Rigid2 {
        Rigid2::new(self.theta + other.theta, self.apply(other.t))
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Least-squares rotation and translation taking `src[i]` onto `dst[i]`
/// (2-D Kabsch; reflections are never produced).
pub fn fit_rigid(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Option<Rigid2> {
    if src.is_empty() || src.len() != dst.len() {
        return None;
    }
    let n = src.len() as f64;
    let centroid = |ps: &[[f64; 2]]| {
        let s = ps.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / n, s[1] / n]
    };
    let (cs, cd) = (centroid(src), centroid(dst));
    let (mut dot, mut cross) = (0.0, 0.0);
    for (p, q) in src.iter().zip(dst) {
        let (px, py) = (p[0] - cs[0], p[1] - cs[1]);
        let (qx, qy) = (q[0] - cd[0], q[1] - cd[1]);
        dot += px * qx + py * qy;
        cross += px * qy - py * qx;
    }
    let theta = if dot == 0.0 && cross == 0.0 { 0.0 } else { cross.atan2(dot) };
    let r = Rigid2::new(theta, [0.0, 0.0]).rotate(cs);
    Some(Rigid2::new(theta, [cd[0] - r[0], cd[1] - r[1]]))
}

/// One visit to a landmark: a run of consecutive ALC points of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkObservation {
    pub class: LandmarkClass,
    /// Centroid of the run.
    pub xy: [f64; 2],
    pub points: Range<usize>,
}

pub fn landmark_observations(tr: &Trajectory) -> Vec<LandmarkObservation> {
    let mut out = Vec::new();
    let mut i = 0;
    let pts = &tr.points;
    while i < pts.len() {
        let Some(class) = pts[i].landmark else {
            i += 1;
            continue;
        };
        let start = i;
        while i < pts.len() && pts[i].landmark == Some(class) {
            i += 1;
        }
        let n = (i - start) as f64;
        let s = pts[start..i].iter().fold([0.0, 0.0], |a, p| [a[0] + p.xy[0], a[1] + p.xy[1]]);
        out.push(LandmarkObservation {
            class,
            xy: [s[0] / n, s[1] / n],
            points: start..i,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    /// Largest distance at which an observation can match a map landmark, m.
    pub gate: f64,
    /// Unmatched observations of one class closer than this merge, m.
    pub merge_radius: f64,
    /// Distinct landmarks a trajectory must share with the map.
    pub min_common: usize,
    /// Re-fit each stretch between consecutive matched landmarks separately.
    pub segment_correction: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            gate: 3.0,
            merge_radius: 2.0,
            min_common: 2,
            segment_correction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Per input trajectory, the transform into the common frame.
    pub transforms: Vec<Rigid2>,
    /// Input trajectories expressed in the common frame.
    pub trajectories: Vec<Trajectory>,
    /// Landmark observations in the common frame.
    pub observations: Vec<Vec<LandmarkObservation>>,
    /// Map landmark index of every observation.
    pub observation_landmark: Vec<Vec<usize>>,
    pub landmarks: Vec<MapLandmark>,
    /// Trajectory indices in the order they were merged.
    pub order: Vec<usize>,
}

struct LandmarkSet {
    landmarks: Vec<MapLandmark>,
    counts: Vec<usize>,
}

impl LandmarkSet {
    fn nearest(&self, class: LandmarkClass, p: [f64; 2], radius: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, l) in self.landmarks.iter().enumerate() {
            if l.class != class {
                continue;
            }
            let d = dist(l.xy, p);
            if d <= radius && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    fn add(&mut self, id: Option<usize>, class: LandmarkClass, p: [f64; 2]) -> usize {
        match id {
            Some(i) => {
                let c = self.counts[i] as f64;
                let l = &mut self.landmarks[i];
                l.xy = [(l.xy[0] * c + p[0]) / (c + 1.0), (l.xy[1] * c + p[1]) / (c + 1.0)];
                self.counts[i] += 1;
                i
            }
            None => {
                self.landmarks.push(MapLandmark { class, xy: p });
                self.counts.push(1);
                self.landmarks.len() - 1
            }
        }
    }
}

struct Hypothesis {
    transform: Rigid2,
    matches: Vec<Option<usize>>,
    inliers: usize,
    sse: f64,
}

fn score(obs: &[LandmarkObservation], set: &LandmarkSet, tf: Rigid2, gate: f64) -> Hypothesis {
    let mut matches = Vec::with_capacity(obs.len());
    let mut inliers = 0;
    let mut sse = 0.0;
    for o in obs {
        let m = set.nearest(o.class, tf.apply(o.xy), gate);
        if let Some((_, d)) = m {
            inliers += 1;
            sse += d * d;
        }
        matches.push(m.map(|(i, _)| i));
    }
    Hypothesis {
        transform: tf,
        matches,
        inliers,
        sse,
    }
}

fn distinct(matches: &[Option<usize>]) -> usize {
    let mut ids: Vec<usize> = matches.iter().flatten().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

/// Best transform of `obs` onto the landmark set: every pair of
/// observations is tried against every same-class landmark pair of similar
/// length, and the hypothesis with the most inliers (then the smallest
/// squared error) is refined by least squares on its inliers.
fn hypothesize(obs: &[LandmarkObservation], set: &LandmarkSet, cfg: &AlignConfig) -> Option<Hypothesis> {
    let mut best: Option<Hypothesis> = None;
    let better = |h: &Hypothesis, b: &Option<Hypothesis>| match b {
        None => true,
        Some(b) => h.inliers > b.inliers || (h.inliers == b.inliers && h.sse < b.sse - 1e-12),
    };
    let lms = &set.landmarks;
    for i in 0..obs.len() {
        for j in i + 1..obs.len() {
            let d_obs = dist(obs[i].xy, obs[j].xy);
            if d_obs < 1e-6 {
                continue;
            }
            for k in 0..lms.len() {
                if lms[k].class != obs[i].class {
                    continue;
                }
                for l in 0..lms.len() {
                    if l == k || lms[l].class != obs[j].class {
                        continue;
                    }
                    if (dist(lms[k].xy, lms[l].xy) - d_obs).abs() > cfg.gate {
                        continue;
                    }
                    let tf = fit_rigid(&[obs[i].xy, obs[j].xy], &[lms[k].xy, lms[l].xy])?;
                    let h = score(obs, set, tf, cfg.gate);
                    if better(&h, &best) {
                        best = Some(h);
                    }
                }
            }
        }
    }
    let mut h = best?;
    for _ in 0..20 {
        let (src, dst): (Vec<[f64; 2]>, Vec<[f64; 2]>) = obs
            .iter()
            .zip(&h.matches)
            .filter_map(|(o, m)| m.map(|m| (o.xy, lms[m].xy)))
            .unzip();
        let Some(tf) = fit_rigid(&src, &dst) else { break };
        let next = score(obs, set, tf, cfg.gate);
        if next.inliers < h.inliers || (next.inliers == h.inliers && next.sse > h.sse) {
            break;
        }
        let settled = next.matches == h.matches;
        h = next;
        if settled {
            break;
        }
    }
    Some(h)
}

/// Stretches between consecutive matched observations get their own
/// two-point rigid fit onto the matched landmarks.
fn correct_segments(tr: &mut Trajectory, obs: &[LandmarkObservation], matches: &[usize], lms: &[MapLandmark]) {
    for w in 0..obs.len().saturating_sub(1) {
        let (a, b) = (&obs[w], &obs[w + 1]);
        if matches[w] == matches[w + 1] {
            continue;
        }
        let Some(tf) = fit_rigid(&[a.xy, b.xy], &[lms[matches[w]].xy, lms[matches[w + 1]].xy]) else {
            continue;
        };
        for p in &mut tr.points[a.points.start..b.points.start] {
            p.xy = tf.apply(p.xy);
        }
    }
}

/// Merges trajectories into one frame. The first trajectory anchors the
/// frame; every other one is fitted onto the landmarks gathered so far and
/// then contributes its own. Trajectories that cannot be placed yet are
/// retried after the others.
pub fn align_trajectories(ts: &[Trajectory], cfg: &AlignConfig) -> Result<Alignment, MapError> {
    if ts.is_empty() {
        return Err(MapError::InvalidInput("no trajectories".into()));
    }
    if !(cfg.gate > 0.0 && cfg.merge_radius >= 0.0 && cfg.min_common >= 1) {
        return Err(MapError::InvalidInput("invalid alignment settings".into()));
    }
    let local: Vec<Vec<LandmarkObservation>> = ts.iter().map(landmark_observations).collect();
    let mut set = LandmarkSet {
        landmarks: Vec::new(),
        counts: Vec::new(),
    };
    let n = ts.len();
    let mut transforms = vec![Rigid2::IDENTITY; n];
    let mut observations = vec![Vec::new(); n];
    let mut observation_landmark = vec![Vec::new(); n];
    let mut trajectories: Vec<Option<Trajectory>> = vec![None; n];
    let mut order = Vec::with_capacity(n);

    let mut place = |i: usize, tf: Rigid2, matches: Vec<Option<usize>>, set: &mut LandmarkSet| {
        let obs: Vec<LandmarkObservation> = local[i]
            .iter()
            .map(|o| LandmarkObservation {
                xy: tf.apply(o.xy),
                ..o.clone()
            })
            .collect();
        let mut ids = Vec::with_capacity(obs.len());
        for (o, m) in obs.iter().zip(&matches) {
            let id = m.or_else(|| set.nearest(o.class, o.xy, cfg.merge_radius).map(|(k, _)| k));
            ids.push(set.add(id, o.class, o.xy));
        }
        let mut tr = ts[i].transformed(&tf);
        if cfg.segment_correction {
            correct_segments(&mut tr, &obs, &ids, &set.landmarks);
        }
        transforms[i] = tf;
        observations[i] = obs;
        observation_landmark[i] = ids;
        trajectories[i] = Some(tr);
        order.push(i);
    };

    place(0, Rigid2::IDENTITY, vec![None; local[0].len()], &mut set);
    let mut pending: Vec<usize> = (1..n).collect();
    while !pending.is_empty() {
        let mut placed = None;
        for (pos, &i) in pending.iter().enumerate() {
            if let Some(h) = hypothesize(&local[i], &set, cfg) {
                if distinct(&h.matches) >= cfg.min_common {
                    placed = Some((pos, i, h));
                    break;
                }
            }
        }
        let Some((pos, i, h)) = placed else {
            return Err(MapError::InsufficientCommonLandmarks(ts[pending[0]].source_id.clone()));
        };
        pending.remove(pos);
        place(i, h.transform, h.matches, &mut set);
    }
    Ok(Alignment {
        transforms,
        trajectories: trajectories.into_iter().map(|t| t.expect("all placed")).collect(),
        observations,
        observation_landmark,
        landmarks: set.landmarks,
        order,
    })
}
