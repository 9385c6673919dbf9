//! Corridor layouts and random-waypoint walks with activity labels.
//!
//! Corridors are polylines. Landmarks sit on them. A walker starts at a
//! random landmark and repeatedly heads for another one along the shortest
//! corridor route. Rooms and stairs are marked by a dwell, lifts by leaving
//! the floor (no fixes) and coming back, corners by the turn itself. Every
//! fix gets independent Gaussian noise and each walker reports in its own
//! randomly placed frame.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::floormap::{
    trajectories_from_samples, Activity, FloorMap, Frame, LandmarkClass, MapLandmark, Rigid2, Trajectory, TrajectorySample,
    LIFT_GAP_S,
};
use crate::seed;

const ON_CORRIDOR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkSpec {
    pub class: LandmarkClass,
    pub xy: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSpec {
    pub corridors: Vec<Vec<[f64; 2]>>,
    pub landmarks: Vec<LandmarkSpec>,
    pub n_trajectories: usize,
    /// Standard deviation of each position fix per axis, m.
    pub noise_sigma: f64,
    /// m/s
    pub walk_speed: f64,
    /// Sampling interval of fixes and activity labels, s.
    pub sample_dt: f64,
    /// Destinations per walk.
    pub legs: usize,
    /// Time spent in a room or on the stairs, s.
    pub dwell_s: f64,
    /// Time away from the floor on a lift ride, s.
    pub lift_blackout_s: f64,
    /// Samples closer than this to a corner are labelled as turning, m.
    pub corner_radius: f64,
    /// Largest offset of a walker's frame from the world origin, m.
    pub frame_offset: f64,
    pub seed: u64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        LayoutSpec::rectangular_loop()
    }
}

impl LayoutSpec {
    /// A 32.3 m × 25.6 m corridor loop with lifts at three corners, a plain
    /// corner at the fourth, two staircases and seven rooms.
    pub fn rectangular_loop() -> LayoutSpec {
        let (w, h) = (32.3, 25.6);
        let lm = |class, x, y| LandmarkSpec { class, xy: [x, y] };
        use LandmarkClass::*;
        LayoutSpec {
            corridors: vec![vec![[0.0, 0.0], [w, 0.0], [w, h], [0.0, h], [0.0, 0.0]]],
            landmarks: vec![
                lm(Lift, 0.0, 0.0),
                lm(Lift, w, h),
                lm(Lift, 0.0, h),
                lm(Corner, w, 0.0),
                lm(Stairs, 16.0, 0.0),
                lm(Stairs, 0.0, 13.0),
                lm(Room, 8.0, 0.0),
                lm(Room, 24.5, 0.0),
                lm(Room, w, 8.5),
                lm(Room, w, 17.0),
                lm(Room, 21.0, h),
                lm(Room, 10.0, h),
                lm(Room, 0.0, 6.0),
            ],
            n_trajectories: 10,
            noise_sigma: 1.0,
            walk_speed: 1.2,
            sample_dt: 1.0,
            legs: 8,
            dwell_s: 5.0,
            lift_blackout_s: 10.0,
            corner_radius: 1.5,
            frame_offset: 50.0,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.corridors.is_empty() || self.corridors.iter().any(|c| c.len() < 2) {
            return bad("every corridor needs at least 2 vertices");
        }
        if self.corridors.iter().flatten().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return bad("corridor vertices must be finite");
        }
        if self.landmarks.len() < 2 {
            return bad("need at least 2 landmarks");
        }
        if self.n_trajectories == 0 || self.legs < 2 {
            return bad("need at least 1 trajectory and 2 legs");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if !(self.walk_speed > 0.0 && self.sample_dt > 0.0 && self.dwell_s > 0.0 && self.corner_radius >= 0.0) {
            return bad("walk_speed, sample_dt and dwell_s must be positive");
        }
        if !(self.lift_blackout_s >= LIFT_GAP_S) {
            return bad("lift_blackout_s must be at least the lift gap");
        }
        if !(self.frame_offset >= 0.0 && self.frame_offset.is_finite()) {
            return bad("frame_offset must be finite and non-negative");
        }
        for l in &self.landmarks {
            let on = segments(&self.corridors).any(|(a, b)| point_segment(l.xy, a, b).1 <= ON_CORRIDOR_TOL);
            if !on {
                return Err(SynthError::InvalidSpec(format!("landmark at {:?} is off the corridors", l.xy)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLayout {
    /// Raw samples of all walkers, in walker order.
    pub samples: Vec<TrajectorySample>,
    /// Landmarked trajectories, one per walker, in each walker's frame.
    pub trajectories: Vec<Trajectory>,
    /// Ground-truth map in world coordinates.
    pub truth: FloorMap,
    /// World-to-walker frame transform per walker.
    pub transforms: Vec<Rigid2>,
}

fn segments(c: &[Vec<[f64; 2]>]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    c.iter().flat_map(|p| p.windows(2).map(|w| (w[0], w[1])))
}

/// Parameter along `a→b` of the projection of `p` and the distance to it.
fn point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + s * d[0], a[1] + s * d[1]];
    (s, dist(p, q))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn lerp(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Corridor graph: polyline vertices and landmarks as nodes, corridor
/// pieces between them as edges.
struct Network {
    nodes: Vec<[f64; 2]>,
    adj: Vec<Vec<(usize, f64)>>,
    landmark_node: Vec<usize>,
}

impl Network {
    fn build(spec: &LayoutSpec) -> Network {
        let mut net = Network {
            nodes: Vec::new(),
            adj: Vec::new(),
            landmark_node: Vec::new(),
        };
        for (a, b) in segments(&spec.corridors) {
            let mut stops: Vec<(f64, [f64; 2])> = vec![(0.0, a), (1.0, b)];
            for l in &spec.landmarks {
                let (s, d) = point_segment(l.xy, a, b);
                if d <= ON_CORRIDOR_TOL {
                    stops.push((s, l.xy));
                }
            }
            stops.sort_by(|x, y| x.0.total_cmp(&y.0));
            let ids: Vec<usize> = stops.iter().map(|&(_, p)| net.node(p)).collect();
            for w in ids.windows(2) {
                if w[0] != w[1] {
                    let len = dist(net.nodes[w[0]], net.nodes[w[1]]);
                    net.adj[w[0]].push((w[1], len));
                    net.adj[w[1]].push((w[0], len));
                }
            }
        }
        net.landmark_node = spec.landmarks.iter().map(|l| net.node(l.xy)).collect();
        net
    }

    fn node(&mut self, p: [f64; 2]) -> usize {
        if let Some(i) = self.nodes.iter().position(|&q| dist(p, q) <= ON_CORRIDOR_TOL) {
            return i;
        }
        self.nodes.push(p);
        self.adj.push(Vec::new());
        self.nodes.len() - 1
    }

    /// Dijkstra from `src`; returns distances and predecessors.
    fn shortest(&self, src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.nodes.len();
        let mut d = vec![f64::INFINITY; n];
        let mut prev = vec![None; n];
        let mut done = vec![false; n];
        d[src] = 0.0;
        loop {
            let next = (0..n).filter(|&i| !done[i] && d[i].is_finite()).min_by(|&a, &b| d[a].total_cmp(&d[b]));
            let Some(u) = next else { break };
            done[u] = true;
            for &(v, w) in &self.adj[u] {
                if d[u] + w < d[v] {
                    d[v] = d[u] + w;
                    prev[v] = Some(u);
                }
            }
        }
        (d, prev)
    }

    fn path(&self, from: usize, to: usize) -> Vec<[f64; 2]> {
        let (_, prev) = self.shortest(from);
        let mut out = vec![self.nodes[to]];
        let mut at = to;
        while let Some(p) = prev[at] {
            out.push(self.nodes[p]);
            at = p;
        }
        out.reverse();
        out
    }

    /// Landmark pairs joined by a corridor stretch with no landmark between.
    fn landmark_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, &start) in self.landmark_node.iter().enumerate() {
            let mut seen = vec![false; self.nodes.len()];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adj[u] {
                    if seen[v] {
                        continue;
                    }
                    seen[v] = true;
                    let hit: Vec<usize> = (0..self.landmark_node.len()).filter(|&j| self.landmark_node[j] == v).collect();
                    if hit.is_empty() {
                        stack.push(v);
                    }
                    out.extend(hit.into_iter().filter(|&j| j > i).map(|j| (i, j)));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

enum Step {
    Move { from: [f64; 2], to: [f64; 2], dur: f64 },
    Stay { at: [f64; 2], dur: f64, activity: Activity },
    Away { dur: f64 },
}

impl Step {
    fn dur(&self) -> f64 {
        match *self {
            Step::Move { dur, .. } | Step::Stay { dur, .. } | Step::Away { dur, .. } => dur,
        }
    }
}

fn plan_walk(spec: &LayoutSpec, net: &Network, rng: &mut seed::Rng) -> Vec<Step> {
    let n_lm = spec.landmarks.len();
    let mut at = rng.random_range(0..n_lm);
    let mut steps = Vec::new();
    for _ in 0..spec.legs {
        let mut to = rng.random_range(0..n_lm - 1);
        if to >= at {
            to += 1;
        }
        let route = net.path(net.landmark_node[at], net.landmark_node[to]);
        for w in route.windows(2) {
            steps.push(Step::Move {
                from: w[0],
                to: w[1],
                dur: dist(w[0], w[1]) / spec.walk_speed,
            });
        }
        let xy = spec.landmarks[to].xy;
        match spec.landmarks[to].class {
            LandmarkClass::Room => steps.push(Step::Stay { at: xy, dur: spec.dwell_s, activity: Activity::Room }),
            LandmarkClass::Stairs => steps.push(Step::Stay { at: xy, dur: spec.dwell_s, activity: Activity::Stairs }),
            LandmarkClass::Lift => {
                // wait, ride away, ride back, step out
                let wait = 2.0 * spec.sample_dt;
                steps.push(Step::Stay { at: xy, dur: wait, activity: Activity::Still });
                steps.push(Step::Away { dur: spec.lift_blackout_s });
                steps.push(Step::Stay { at: xy, dur: wait, activity: Activity::Still });
            }
            LandmarkClass::Corner => {}
        }
        at = to;
    }
    steps
}

fn random_frame(spec: &LayoutSpec, rng: &mut seed::Rng) -> Rigid2 {
    let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let o = spec.frame_offset;
    let t = if o > 0.0 {
        [rng.random_range(-o..o), rng.random_range(-o..o)]
    } else {
        [0.0, 0.0]
    };
    Rigid2 { theta, t }
}

fn walk_samples(spec: &LayoutSpec, steps: &[Step], frame: &Rigid2, source_id: &str, rng: &mut seed::Rng) -> Vec<TrajectorySample> {
    let corners: Vec<[f64; 2]> = spec.landmarks.iter().filter(|l| l.class == LandmarkClass::Corner).map(|l| l.xy).collect();
    let total: f64 = steps.iter().map(Step::dur).sum();
    let mut out = Vec::new();
    let (mut k, mut idx, mut start) = (0u64, 0usize, 0.0);
    loop {
        let t = k as f64 * spec.sample_dt;
        if t > total {
            break;
        }
        while idx + 1 < steps.len() && t > start + steps[idx].dur() {
            start += steps[idx].dur();
            idx += 1;
        }
        let (truth, activity) = match steps[idx] {
            Step::Move { from, to, dur } => {
                let p = lerp(from, to, if dur > 0.0 { ((t - start) / dur).clamp(0.0, 1.0) } else { 1.0 });
                let turning = corners.iter().any(|&c| dist(p, c) <= spec.corner_radius);
                (Some(p), if turning { Activity::Corner } else { Activity::Walking })
            }
            Step::Stay { at, activity, .. } => (Some(at), activity),
            Step::Away { .. } => (None, Activity::Lift),
        };
        let xy = truth.map(|p| {
            let nx: f64 = StandardNormal.sample(rng);
            let ny: f64 = StandardNormal.sample(rng);
            frame.apply([p[0] + spec.noise_sigma * nx, p[1] + spec.noise_sigma * ny])
        });
        out.push(TrajectorySample {
            t,
            xy,
            activity,
            source_id: source_id.to_string(),
        });
        k += 1;
    }
    out
}

/// Walks `n_trajectories` walkers through the layout. Each walker draws from
/// its own seed stream.
pub fn generate_trajectories(spec: &LayoutSpec) -> Result<GeneratedLayout, SynthError> {
    spec.validate()?;
    let net = Network::build(spec);
    let (d, _) = net.shortest(net.landmark_node[0]);
    if net.landmark_node.iter().any(|&n| !d[n].is_finite()) {
        return Err(SynthError::InvalidSpec("landmarks are not all reachable along corridors".into()));
    }
    let root = seed::derive(spec.seed, "layout");
    let mut samples = Vec::new();
    let mut transforms = Vec::with_capacity(spec.n_trajectories);
    for i in 0..spec.n_trajectories {
        let mut rng = seed::rng(seed::stream(root, i as u64));
        let frame = random_frame(spec, &mut rng);
        let steps = plan_walk(spec, &net, &mut rng);
        samples.extend(walk_samples(spec, &steps, &frame, &format!("walker{:02}", i + 1), &mut rng));
        transforms.push(frame);
    }
    let trajectories =
        trajectories_from_samples(&samples).map_err(|e| SynthError::InvalidSpec(format!("generated walk is unusable: {e}")))?;
    let truth = FloorMap {
        landmarks: spec.landmarks.iter().map(|l| MapLandmark { class: l.class, xy: l.xy }).collect(),
        edges: net.landmark_edges(),
        paths: spec.corridors.clone(),
        frame: Frame::World,
    };
    Ok(GeneratedLayout {
        samples,
        trajectories,
        truth,
        transforms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floormap::landmark_observations;

    fn quiet() -> LayoutSpec {
        LayoutSpec {
            noise_sigma: 0.0,
            ..LayoutSpec::default()
        }
    }

    #[test]
    fn noiseless_walks_stay_on_corridors() {
        let spec = quiet();
        let g = generate_trajectories(&spec).unwrap();
        assert_eq!(g.trajectories.len(), spec.n_trajectories);
        for (tr, tf) in g.trajectories.iter().zip(&g.transforms) {
            let back = tf.inverse();
            for p in &tr.points {
                let w = back.apply(p.xy);
                let off = segments(&spec.corridors).map(|(a, b)| point_segment(w, a, b).1).fold(f64::INFINITY, f64::min);
                assert!(off < 1e-9, "point {w:?} is {off} m off the corridors");
            }
        }
    }

    #[test]
    fn noiseless_landmarks_sit_on_truth() {
        let spec = quiet();
        let g = generate_trajectories(&spec).unwrap();
        for (tr, tf) in g.trajectories.iter().zip(&g.transforms) {
            let back = tf.inverse();
            for o in landmark_observations(tr) {
                let w = back.apply(o.xy);
                let nearest = spec
                    .landmarks
                    .iter()
                    .filter(|l| l.class == o.class)
                    .map(|l| dist(l.xy, w))
                    .fold(f64::INFINITY, f64::min);
                let tol = if o.class == LandmarkClass::Corner { spec.corner_radius } else { 1e-9 };
                assert!(nearest <= tol, "{:?} observation {nearest} m from truth", o.class);
            }
        }
    }

    #[test]
    fn walkers_share_landmarks() {
        let spec = LayoutSpec::default();
        let g = generate_trajectories(&spec).unwrap();
        // identify each observation with its true landmark, in the world frame
        let visited: Vec<Vec<usize>> = g
            .trajectories
            .iter()
            .zip(&g.transforms)
            .map(|(tr, tf)| {
                let back = tf.inverse();
                let mut ids: Vec<usize> = landmark_observations(tr)
                    .iter()
                    .map(|o| {
                        let w = back.apply(o.xy);
                        (0..spec.landmarks.len())
                            .filter(|&j| spec.landmarks[j].class == o.class)
                            .min_by(|&a, &b| dist(spec.landmarks[a].xy, w).total_cmp(&dist(spec.landmarks[b].xy, w)))
                            .unwrap()
                    })
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                ids
            })
            .collect();
        for (i, v) in visited.iter().enumerate().skip(1) {
            let before: Vec<usize> = visited[..i].iter().flatten().copied().collect();
            let shared = v.iter().filter(|j| before.contains(j)).count();
            assert!(shared >= 2, "walker {i} shares {shared} landmarks with earlier walkers");
        }
    }

    #[test]
    fn lift_rides_leave_gaps() {
        let g = generate_trajectories(&LayoutSpec::default()).unwrap();
        let lifts = g.samples.iter().filter(|s| s.activity == Activity::Lift).count();
        assert!(lifts > 0);
        assert!(g.samples.iter().filter(|s| s.activity == Activity::Lift).all(|s| s.xy.is_none()));
    }

    #[test]
    fn truth_edges_follow_the_loop() {
        let spec = LayoutSpec::default();
        let net = Network::build(&spec);
        let e = net.landmark_edges();
        // a single loop through every landmark has as many edges as landmarks
        assert_eq!(e.len(), spec.landmarks.len());
        assert!(e.contains(&(0, 6)));
        assert!(e.contains(&(0, 12)));
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = LayoutSpec::default();
        assert_eq!(generate_trajectories(&spec).unwrap(), generate_trajectories(&spec).unwrap());
        let other = LayoutSpec { seed: 8, ..spec.clone() };
        assert_ne!(generate_trajectories(&spec).unwrap().samples, generate_trajectories(&other).unwrap().samples);
    }

    #[test]
    fn rejects_landmark_off_corridor() {
        let mut spec = LayoutSpec::default();
        spec.landmarks.push(LandmarkSpec {
            class: LandmarkClass::Room,
            xy: [5.0, 5.0],
        });
        assert!(matches!(generate_trajectories(&spec), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let s = LayoutSpec::default();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(toml::from_str::<LayoutSpec>(&text).unwrap(), s);
    }
}
