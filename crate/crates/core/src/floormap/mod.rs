//! Indoor floor maps from activity-labelled walking trajectories.
//!
//! Trajectories are reduced to activity landmarks (lifts, stairs, rooms and
//! corners), rigidly aligned on shared landmarks, refined with a
//! Levenberg-Marquardt graph optimization and scored against a reference
//! map with landmark (GDM) and shape (SDM) discrepancies.

mod align;
mod graph;
mod hungarian;
mod io;
mod metrics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align_trajectories, fit_rigid, landmark_observations, AlignConfig, Alignment, LandmarkObservation, Rigid2};
pub use graph::{build_graph, optimize_graph, EdgeKind, GraphEdge, GraphNode, LandmarkGraph, LmConfig, NodeKind, OptimizeOutcome};
pub use hungarian::assign;
pub use io::{parse_trajectory_csv, render_svg, trajectories_from_samples, write_trajectory_csv, TrajectorySample};
pub use metrics::{gdm, register, sdm, DiscrepancyReport, Registration, Summary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("no activity label within {max_gap_s} s of the fix at t = {t}")]
    AlignmentGapTooLarge { t: f64, max_gap_s: f64 },
    #[error("trajectory `{0}` shares too few landmarks with the map")]
    InsufficientCommonLandmarks(String),
    #[error("graph is not connected: {0} nodes unreachable from node 0")]
    NotConnected(usize),
    #[error("optimization diverged after {0} consecutive rejected steps")]
    DivergedOptimization(usize),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkClass {
    Lift,
    Stairs,
    Room,
    Corner,
}

impl LandmarkClass {
    pub const ALL: [LandmarkClass; 4] = [LandmarkClass::Lift, LandmarkClass::Stairs, LandmarkClass::Room, LandmarkClass::Corner];
}

/// Activity recognised for one sample of a walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Walking,
    Still,
    Lift,
    Stairs,
    Room,
    Corner,
}

impl Activity {
    pub fn landmark(self) -> Option<LandmarkClass> {
        match self {
            Activity::Lift => Some(LandmarkClass::Lift),
            Activity::Stairs => Some(LandmarkClass::Stairs),
            Activity::Room => Some(LandmarkClass::Room),
            Activity::Corner => Some(LandmarkClass::Corner),
            Activity::Walking | Activity::Still => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Walking => "walking",
            Activity::Still => "still",
            Activity::Lift => "lift",
            Activity::Stairs => "stairs",
            Activity::Room => "room",
            Activity::Corner => "corner",
        }
    }

    pub fn parse(s: &str) -> Option<Activity> {
        [Activity::Walking, Activity::Still, Activity::Lift, Activity::Stairs, Activity::Room, Activity::Corner]
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
    }
}

/// A trajectory sample. Points with a landmark class are activity landmark
/// coordinates (ALC); the rest are plain waypoints (NALC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    pub t: f64,
    pub xy: [f64; 2],
    pub landmark: Option<LandmarkClass>,
}

impl TrajPoint {
    pub fn is_alc(&self) -> bool {
        self.landmark.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub source_id: String,
    pub points: Vec<TrajPoint>,
}

impl Trajectory {
    pub fn new(source_id: impl Into<String>, points: Vec<TrajPoint>) -> Result<Trajectory, MapError> {
        let source_id = source_id.into();
        if points.len() < 2 {
            return Err(MapError::InvalidTrajectory(format!("`{source_id}` has fewer than 2 points")));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1].t > w[0].t)) {
            return Err(MapError::InvalidTrajectory(format!(
                "`{source_id}`: timestamps not increasing at t = {}",
                w[1].t
            )));
        }
        if points.iter().any(|p| !(p.xy[0].is_finite() && p.xy[1].is_finite() && p.t.is_finite())) {
            return Err(MapError::InvalidTrajectory(format!("`{source_id}` has non-finite values")));
        }
        Ok(Trajectory { source_id, points })
    }

    pub fn transformed(&self, r: &Rigid2) -> Trajectory {
        Trajectory {
            source_id: self.source_id.clone(),
            points: self.points.iter().map(|p| TrajPoint { xy: r.apply(p.xy), ..*p }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPosition {
    pub t: f64,
    pub xy: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedActivity {
    pub t: f64,
    pub activity: Activity,
}

/// Nearest-time join allowed between a fix and an activity label, s.
pub const MAX_JOIN_GAP_S: f64 = 2.0;
/// A fix gap at least this long is read as a lift ride, s.
pub const LIFT_GAP_S: f64 = 5.0;

/// Labels every position fix with the activity nearest in time and inserts
/// a lift landmark at the centre of every signal gap of at least
/// [`LIFT_GAP_S`].
pub fn landmark_trajectory(
    source_id: &str,
    positions: &[TimedPosition],
    activities: &[TimedActivity],
) -> Result<Trajectory, MapError> {
    let mut acts: Vec<TimedActivity> = activities.to_vec();
    acts.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut pos: Vec<TimedPosition> = positions.to_vec();
    pos.sort_by(|a, b| a.t.total_cmp(&b.t));
    let nearest = |t: f64| -> Result<Activity, MapError> {
        let i = acts.partition_point(|a| a.t < t);
        let mut best: Option<(f64, Activity)> = None;
        for j in [i.wrapping_sub(1), i] {
            if let Some(a) = acts.get(j) {
                let d = (a.t - t).abs();
                // earlier label wins an exact tie
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, a.activity));
                }
            }
        }
        match best {
            Some((d, a)) if d <= MAX_JOIN_GAP_S => Ok(a),
            _ => Err(MapError::AlignmentGapTooLarge {
                t,
                max_gap_s: MAX_JOIN_GAP_S,
            }),
        }
    };
    let mut points = Vec::with_capacity(pos.len());
    for (k, p) in pos.iter().enumerate() {
        if k > 0 {
            let prev = &pos[k - 1];
            if p.t - prev.t >= LIFT_GAP_S {
                points.push(TrajPoint {
                    t: 0.5 * (prev.t + p.t),
                    xy: [0.5 * (prev.xy[0] + p.xy[0]), 0.5 * (prev.xy[1] + p.xy[1])],
                    landmark: Some(LandmarkClass::Lift),
                });
            }
        }
        points.push(TrajPoint {
            t: p.t,
            xy: p.xy,
            landmark: nearest(p.t)?.landmark(),
        });
    }
    Trajectory::new(source_id, points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapLandmark {
    pub class: LandmarkClass,
    pub xy: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Frame {
    /// Coordinates of the first aligned trajectory.
    FirstTrajectory,
    /// Registered onto a reference map with the stored transform.
    Registered { transform: Rigid2 },
    /// Ground-truth world frame.
    World,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorMap {
    pub landmarks: Vec<MapLandmark>,
    /// Landmark index pairs joined by a walkable connection.
    pub edges: Vec<(usize, usize)>,
    pub paths: Vec<Vec<[f64; 2]>>,
    pub frame: Frame,
}

impl FloorMap {
    pub fn transformed(&self, r: &Rigid2) -> FloorMap {
        FloorMap {
            landmarks: self.landmarks.iter().map(|l| MapLandmark { xy: r.apply(l.xy), ..*l }).collect(),
            edges: self.edges.clone(),
            paths: self.paths.iter().map(|p| p.iter().map(|&q| r.apply(q)).collect()).collect(),
            frame: Frame::Registered { transform: *r },
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("map serializes");
        crate::numfmt::round_json(&mut v);
        v
    }
}

/// Settings of the whole trajectory-to-map chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub align: AlignConfig,
    pub lm: LmConfig,
    /// Position noise of a single fix, m.
    pub position_sigma: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            align: AlignConfig::default(),
            lm: LmConfig::default(),
            position_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub map: FloorMap,
    pub alignment: Alignment,
    pub graph: LandmarkGraph,
    pub outcome: OptimizeOutcome,
}

/// Alignment, graph construction and optimization in one call.
pub fn build_floor_map(trajectories: &[Trajectory], cfg: &MapConfig) -> Result<MapResult, MapError> {
    if !(cfg.position_sigma > 0.0) {
        return Err(MapError::InvalidInput("position_sigma must be positive".into()));
    }
    let alignment = align_trajectories(trajectories, &cfg.align)?;
    let graph = build_graph(&alignment, cfg.position_sigma);
    let outcome = optimize_graph(&graph, &cfg.lm)?;
    let map = graph::graph_to_map(&outcome.graph, &alignment);
    Ok(MapResult {
        map,
        alignment,
        graph,
        outcome,
    })
}
