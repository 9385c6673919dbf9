//! Landmark graph and its Levenberg-Marquardt optimization.
//!
//! Nodes are trajectory points plus one node per merged landmark. Odometry
//! edges keep consecutive points at their measured displacement; identity
//! edges tie every ALC point to its landmark node. Residuals are linear in
//! the node positions, so the normal matrix is the weighted graph Laplacian
//! (shared by the x and y axes) and each damped step is a sparse solve.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::align::Alignment;
use super::{FloorMap, Frame, LandmarkClass, MapError, MapLandmark};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum NodeKind {
    Point { trajectory: usize, index: usize },
    Landmark { id: usize, class: LandmarkClass },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub xy: [f64; 2],
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Odometry,
    Identity,
}

/// Constraint `x[to] - x[from] ≈ measurement` with information `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub measurement: [f64; 2],
    pub weight: f64,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LandmarkGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl LandmarkGraph {
    pub fn cost_at(&self, xy: &[[f64; 2]]) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let rx = xy[e.to][0] - xy[e.from][0] - e.measurement[0];
                let ry = xy[e.to][1] - xy[e.from][1] - e.measurement[1];
                e.weight * (rx * rx + ry * ry)
            })
            .sum()
    }

    pub fn cost(&self) -> f64 {
        self.cost_at(&self.positions())
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.nodes.iter().map(|n| n.xy).collect()
    }

    fn check(&self) -> Result<(), MapError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(MapError::InvalidInput("empty graph".into()));
        }
        for e in &self.edges {
            if e.from >= n || e.to >= n || e.from == e.to {
                return Err(MapError::InvalidInput(format!("edge {}-{} is invalid", e.from, e.to)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(MapError::InvalidInput(format!("edge {}-{} has weight {}", e.from, e.to, e.weight)));
            }
        }
        let mut seen = vec![false; n];
        let adj = self.adjacency();
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let unreachable = seen.iter().filter(|s| !**s).count();
        if unreachable > 0 {
            return Err(MapError::NotConnected(unreachable));
        }
        Ok(())
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push((e.to, e.weight));
            adj[e.to].push((e.from, e.weight));
        }
        adj
    }
}

/// Point nodes of every trajectory (in input order, so node 0 is the first
/// point of the anchor trajectory), then the landmark nodes. Odometry edges
/// carry `1/(2σ²)` because both ends are noisy fixes; identity edges `1/σ²`.
pub fn build_graph(al: &Alignment, sigma: f64) -> LandmarkGraph {
    let mut g = LandmarkGraph::default();
    let mut first = Vec::with_capacity(al.trajectories.len());
    for (ti, tr) in al.trajectories.iter().enumerate() {
        first.push(g.nodes.len());
        for (k, p) in tr.points.iter().enumerate() {
            g.nodes.push(GraphNode {
                xy: p.xy,
                kind: NodeKind::Point { trajectory: ti, index: k },
            });
        }
    }
    let lm_base = g.nodes.len();
    for (id, l) in al.landmarks.iter().enumerate() {
        g.nodes.push(GraphNode {
            xy: l.xy,
            kind: NodeKind::Landmark { id, class: l.class },
        });
    }
    let w_odo = 1.0 / (2.0 * sigma * sigma);
    let w_id = 1.0 / (sigma * sigma);
    for (ti, tr) in al.trajectories.iter().enumerate() {
        let base = first[ti];
        for k in 1..tr.points.len() {
            let (a, b) = (tr.points[k - 1].xy, tr.points[k].xy);
            g.edges.push(GraphEdge {
                from: base + k - 1,
                to: base + k,
                measurement: [b[0] - a[0], b[1] - a[1]],
                weight: w_odo,
                kind: EdgeKind::Odometry,
            });
        }
        for (obs, &lm) in al.observations[ti].iter().zip(&al.observation_landmark[ti]) {
            for k in obs.points.clone() {
                g.edges.push(GraphEdge {
                    from: lm_base + lm,
                    to: base + k,
                    measurement: [0.0, 0.0],
                    weight: w_id,
                    kind: EdgeKind::Identity,
                });
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    pub max_rejects: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 10.0,
            max_iterations: 200,
            rel_tol: 1e-9,
            max_rejects: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub graph: LandmarkGraph,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    /// Cost after the start and after every accepted step.
    pub accepted_costs: Vec<f64>,
}

/// Sparse symmetric system `(L + λ·diag(L)) δ` over the free nodes
/// (node 0 is pinned).
struct Reduced {
    adj: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl Reduced {
    fn matvec(&self, damping: f64, v: &[f64], out: &mut [f64]) {
        // index 0 is the pinned node and stays zero
        out[0] = 0.0;
        for i in 1..v.len() {
            let mut s = self.diag[i] * (1.0 + damping) * v[i];
            for &(j, w) in &self.adj[i] {
                if j != 0 {
                    s -= w * v[j];
                }
            }
            out[i] = s;
        }
    }

    /// Jacobi-preconditioned conjugate gradients.
    fn solve(&self, damping: f64, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        r[0] = 0.0;
        let pre: Vec<f64> = self.diag.iter().map(|d| if *d > 0.0 { 1.0 / (d * (1.0 + damping)) } else { 0.0 }).collect();
        let mut z: Vec<f64> = r.iter().zip(&pre).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b_norm == 0.0 {
            return x;
        }
        let mut ap = vec![0.0; n];
        for _ in 0..(10 * n).max(100) {
            self.matvec(damping, &p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-13 * b_norm {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * pre[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }
}

/// Minimizes the weighted squared edge residuals with node 0 held fixed.
pub fn optimize_graph(g: &LandmarkGraph, cfg: &LmConfig) -> Result<OptimizeOutcome, MapError> {
    g.check()?;
    if !(cfg.initial_damping > 0.0 && cfg.damping_up > 1.0 && cfg.damping_down > 1.0 && cfg.max_rejects > 0) {
        return Err(MapError::InvalidInput("invalid LM settings".into()));
    }
    let n = g.nodes.len();
    let adj = g.adjacency();
    let diag: Vec<f64> = adj.iter().map(|a| a.iter().map(|(_, w)| w).sum()).collect();
    let sys = Reduced { adj, diag };
    let mut xy = g.positions();
    let mut cost = g.cost_at(&xy);
    let initial_cost = cost;
    let mut accepted_costs = vec![cost];
    let mut damping = cfg.initial_damping;
    let mut rejects = 0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations && cost > 0.0 {
        iterations += 1;
        // negative gradient per axis: b = -Jᵀ W r
        let mut b = [vec![0.0; n], vec![0.0; n]];
        for e in &g.edges {
            for a in 0..2 {
                let r = xy[e.to][a] - xy[e.from][a] - e.measurement[a];
                b[a][e.to] -= e.weight * r;
                b[a][e.from] += e.weight * r;
            }
        }
        let dx = sys.solve(damping, &b[0]);
        let dy = sys.solve(damping, &b[1]);
        let trial: Vec<[f64; 2]> = (0..n).map(|i| [xy[i][0] + dx[i], xy[i][1] + dy[i]]).collect();
        let trial_cost = g.cost_at(&trial);
        if trial_cost < cost {
            let rel = (cost - trial_cost) / cost;
            xy = trial;
            cost = trial_cost;
            accepted_costs.push(cost);
            damping /= cfg.damping_down;
            rejects = 0;
            if rel < cfg.rel_tol {
                break;
            }
        } else {
            if (trial_cost - cost).abs() <= cfg.rel_tol * cost {
                // already at the minimum to working precision
                break;
            }
            damping *= cfg.damping_up;
            rejects += 1;
            if rejects >= cfg.max_rejects {
                return Err(MapError::DivergedOptimization(rejects));
            }
        }
    }
    let mut graph = g.clone();
    for (node, p) in graph.nodes.iter_mut().zip(&xy) {
        node.xy = *p;
    }
    Ok(OptimizeOutcome {
        graph,
        initial_cost,
        final_cost: cost,
        iterations,
        accepted_costs,
    })
}

/// Landmark nodes become map landmarks; consecutive distinct landmark
/// visits of a trajectory become map edges; point nodes become paths.
pub fn graph_to_map(g: &LandmarkGraph, al: &Alignment) -> FloorMap {
    let mut landmarks = vec![
        MapLandmark {
            class: LandmarkClass::Lift,
            xy: [0.0, 0.0]
        };
        al.landmarks.len()
    ];
    let mut paths: Vec<Vec<[f64; 2]>> = al.trajectories.iter().map(|t| vec![[0.0, 0.0]; t.points.len()]).collect();
    for node in &g.nodes {
        match node.kind {
            NodeKind::Landmark { id, class } => landmarks[id] = MapLandmark { class, xy: node.xy },
            NodeKind::Point { trajectory, index } => paths[trajectory][index] = node.xy,
        }
    }
    let mut edges = Vec::new();
    for ids in &al.observation_landmark {
        for w in ids.windows(2) {
            if w[0] != w[1] {
                edges.push((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    FloorMap {
        landmarks,
        edges,
        paths,
        frame: Frame::FirstTrajectory,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(xy: [f64; 2], k: usize) -> GraphNode {
        GraphNode {
            xy,
            kind: NodeKind::Point { trajectory: 0, index: k },
        }
    }

    fn odo(from: usize, to: usize, m: [f64; 2]) -> GraphEdge {
        GraphEdge {
            from,
            to,
            measurement: m,
            weight: 1.0,
            kind: EdgeKind::Odometry,
        }
    }

    /// A square walk of side 10 sampled every metre whose odometry drifts
    /// by `drift` m per step along y, closed by a shared corner landmark.
    fn drifting_square(drift: f64) -> LandmarkGraph {
        let mut truth = Vec::new();
        for side in 0..4 {
            for k in 0..10 {
                let s = k as f64;
                truth.push(match side {
                    0 => [s, 0.0],
                    1 => [10.0, s],
                    2 => [10.0 - s, 10.0],
                    _ => [0.0, 10.0 - s],
                });
            }
        }
        truth.push([0.0, 0.0]);
        let mut g = LandmarkGraph::default();
        let mut pos = [0.0, 0.0];
        for (k, w) in truth.windows(2).enumerate() {
            if k == 0 {
                g.nodes.push(point(pos, 0));
            }
            let m = [w[1][0] - w[0][0], w[1][1] - w[0][1] + drift];
            pos = [pos[0] + m[0], pos[1] + m[1]];
            g.nodes.push(point(pos, k + 1));
            g.edges.push(odo(k, k + 1, m));
        }
        let last = g.nodes.len() - 1;
        g.nodes.push(GraphNode {
            xy: [0.0, 0.0],
            kind: NodeKind::Landmark {
                id: 0,
                class: LandmarkClass::Corner,
            },
        });
        let lm = g.nodes.len() - 1;
        for k in [0, last] {
            g.edges.push(GraphEdge {
                from: lm,
                to: k,
                measurement: [0.0, 0.0],
                weight: 10.0,
                kind: EdgeKind::Identity,
            });
        }
        g
    }

    #[test]
    fn consistent_graph_is_left_alone() {
        let g = drifting_square(0.0);
        let out = optimize_graph(&g, &LmConfig::default()).unwrap();
        assert!(out.final_cost < 1e-12);
        for (a, b) in out.graph.nodes.iter().zip(&g.nodes) {
            assert!((a.xy[0] - b.xy[0]).abs() < 1e-9 && (a.xy[1] - b.xy[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn drift_loop_closes() {
        let g = drifting_square(0.05);
        let before = g.nodes[40].xy;
        assert!((before[1] - 2.0).abs() < 1e-9);
        let out = optimize_graph(&g, &LmConfig::default()).unwrap();
        assert!(out.final_cost < out.initial_cost);
        let gap = |n: &[GraphNode]| ((n[40].xy[0] - n[0].xy[0]).powi(2) + (n[40].xy[1] - n[0].xy[1]).powi(2)).sqrt();
        assert!(gap(&out.graph.nodes) < 0.2 * gap(&g.nodes), "{}", gap(&out.graph.nodes));
        for w in out.accepted_costs.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert_eq!(out.graph.nodes[0].xy, g.nodes[0].xy);
    }

    #[test]
    fn optimum_matches_dense_least_squares() {
        use nalgebra::{DMatrix, DVector};
        let g = drifting_square(0.1);
        let out = optimize_graph(&g, &LmConfig::default()).unwrap();
        // dense normal equations on the free nodes, per axis
        let n = g.nodes.len();
        for axis in 0..2 {
            let mut h = DMatrix::<f64>::zeros(n - 1, n - 1);
            let mut rhs = DVector::<f64>::zeros(n - 1);
            for e in &g.edges {
                let w = e.weight;
                let m = e.measurement[axis];
                let (i, j) = (e.from, e.to);
                // residual x_j - x_i - m with x_0 = g.nodes[0]
                let x0 = g.nodes[0].xy[axis];
                if i > 0 { h[(i - 1, i - 1)] += w; }
                if j > 0 { h[(j - 1, j - 1)] += w; }
                if i > 0 && j > 0 {
                    h[(i - 1, j - 1)] -= w;
                    h[(j - 1, i - 1)] -= w;
                }
                let c = m + if i == 0 { x0 } else { 0.0 } - if j == 0 { x0 } else { 0.0 };
                if j > 0 { rhs[j - 1] += w * c; }
                if i > 0 { rhs[i - 1] -= w * c; }
            }
            let sol = h.cholesky().unwrap().solve(&rhs);
            for k in 1..n {
                assert!((sol[k - 1] - out.graph.nodes[k].xy[axis]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let mut g = drifting_square(0.0);
        g.nodes.push(point([1.0, 1.0], 99));
        assert_eq!(optimize_graph(&g, &LmConfig::default()).unwrap_err(), MapError::NotConnected(1));
    }
}
