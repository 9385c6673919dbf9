//! CART trees: Gini for classification, squared error for regression.
//!
//! Feature columns are sorted once per training set and every node keeps its
//! samples in per-feature sorted order, so a split search is linear in the
//! node size. Ties go to the lowest feature index, then the lowest threshold.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` = all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Depth of the deepest leaf (a lone root leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn set_leaf_value(&mut self, node: usize, v: Vec<f64>) {
        if let Node::Leaf { value } = &mut self.nodes[node] {
            *value = v;
        }
    }
}

/// Column-major copy of the features plus each column's sort order.
pub struct Presorted {
    pub columns: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(rows: &[Vec<f64>]) -> Presorted {
        let d = rows.first().map_or(0, |r| r.len());
        let columns: Vec<Vec<f64>> = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let order = columns
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { columns, order }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }
}

pub enum Target<'a> {
    Classes { labels: &'a [usize], n_classes: usize },
    Regression { values: &'a [f64] },
}

struct Builder<'a> {
    data: &'a Presorted,
    weights: &'a [f64],
    target: Target<'a>,
    params: TreeParams,
    rng: Option<&'a mut Rng>,
    nodes: Vec<Node>,
    leaf_of: Vec<u32>,
    goes_left: Vec<bool>,
}

struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn stats(&self, samples: &[u32]) -> (f64, Vec<f64>) {
        match &self.target {
            Target::Classes { labels, n_classes } => {
                let mut counts = vec![0.0; *n_classes];
                let mut w = 0.0;
                for &i in samples {
                    let wi = self.weights[i as usize];
                    counts[labels[i as usize]] += wi;
                    w += wi;
                }
                (w, counts)
            }
            Target::Regression { values } => {
                let mut s = 0.0;
                let mut w = 0.0;
                for &i in samples {
                    let wi = self.weights[i as usize];
                    s += wi * values[i as usize];
                    w += wi;
                }
                (w, vec![s])
            }
        }
    }

    /// Higher is better; a split improves on the node when its score exceeds
    /// the node's own score.
    fn node_score(&self, w: f64, acc: &[f64]) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        acc.iter().map(|s| s * s).sum::<f64>() / w
    }

    fn leaf_value(&self, w: f64, acc: &[f64]) -> Vec<f64> {
        match self.target {
            Target::Classes { .. } => acc.iter().map(|c| if w > 0.0 { c / w } else { 0.0 }).collect(),
            Target::Regression { .. } => vec![if w > 0.0 { acc[0] / w } else { 0.0 }],
        }
    }

    fn is_pure(&self, acc: &[f64], w: f64) -> bool {
        match self.target {
            Target::Classes { .. } => acc.iter().any(|&c| c >= w),
            Target::Regression { values } => {
                let _ = values;
                false
            }
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.data.dim();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn find_split(&mut self, lists: &[Vec<u32>], total_w: f64, total: &[f64]) -> Option<Best> {
        let min_leaf = self.params.min_samples_leaf as f64;
        let parent = self.node_score(total_w, total);
        let mut best: Option<Best> = None;
        let k = total.len();
        let mut left = vec![0.0; k];
        for f in self.candidate_features() {
            let col = &self.data.columns[f];
            let list = &lists[f];
            left.iter_mut().for_each(|v| *v = 0.0);
            let mut lw = 0.0;
            for pos in 0..list.len().saturating_sub(1) {
                let i = list[pos] as usize;
                let wi = self.weights[i];
                lw += wi;
                match &self.target {
                    Target::Classes { labels, .. } => left[labels[i]] += wi,
                    Target::Regression { values } => left[0] += wi * values[i],
                }
                let xv = col[i];
                let xn = col[list[pos + 1] as usize];
                if xn <= xv {
                    continue;
                }
                let rw = total_w - lw;
                if lw < min_leaf || rw < min_leaf {
                    continue;
                }
                let mut score = self.node_score(lw, &left);
                let right: f64 = match &self.target {
                    Target::Classes { .. } => (0..k).map(|c| (total[c] - left[c]).powi(2)).sum::<f64>() / rw,
                    Target::Regression { .. } => (total[0] - left[0]).powi(2) / rw,
                };
                score += right;
                if score <= parent + 1e-12 * parent.abs().max(1e-300) {
                    continue;
                }
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = 0.5 * (xv + xn);
                    if threshold >= xn {
                        threshold = xv;
                    }
                    best = Some(Best {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let id = self.nodes.len();
        let samples = &lists[0];
        let (w, acc) = self.stats(samples);
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(w, &acc),
        });

        let p = self.params;
        let can_split = depth < p.max_depth
            && w >= p.min_samples_split as f64
            && w >= 2.0 * p.min_samples_leaf as f64
            && !self.is_pure(&acc, w);
        let best = if can_split { self.find_split(&lists, w, &acc) } else { None };
        let Some(best) = best else {
            for &i in &lists[0] {
                self.leaf_of[i as usize] = id as u32;
            }
            return id;
        };

        let col = &self.data.columns[best.feature];
        for &i in &lists[0] {
            self.goes_left[i as usize] = col[i as usize] <= best.threshold;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in &lists {
            let (l, r): (Vec<u32>, Vec<u32>) = list.iter().partition(|&&i| self.goes_left[i as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        drop(lists);
        let left = self.build(left_lists, depth + 1);
        let right = self.build(right_lists, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree over the samples with positive weight. Returns the tree
/// and, for every training row, the index of the leaf it landed in
/// (`u32::MAX` for rows outside the sample).
pub fn build_tree(
    data: &Presorted,
    weights: &[f64],
    target: Target<'_>,
    params: TreeParams,
    rng: Option<&mut Rng>,
) -> (Tree, Vec<u32>) {
    let n = data.n_rows();
    let lists: Vec<Vec<u32>> = data
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| weights[i as usize] > 0.0).collect())
        .collect();
    let mut b = Builder {
        data,
        weights,
        target,
        params,
        rng,
        nodes: Vec::new(),
        leaf_of: vec![u32::MAX; n],
        goes_left: vec![false; n],
    };
    if lists.is_empty() {
        // zero features: a single leaf over everything
        let all: Vec<u32> = (0..n as u32).filter(|&i| weights[i as usize] > 0.0).collect();
        b.build(vec![all], 0);
    } else {
        b.build(lists, 0);
    }
    (Tree { nodes: b.nodes }, b.leaf_of)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }

    #[test]
    fn separable_classes_are_fit_exactly() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 12)).collect();
        let data = Presorted::new(&rows);
        let w = vec![1.0; 20];
        let (tree, leaf_of) = build_tree(&data, &w, Target::Classes { labels: &labels, n_classes: 2 }, params(5), None);
        assert_eq!(tree.depth(), 1);
        match &tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 11.5);
            }
            _ => panic!(),
        }
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(tree.predict(r)[l], 1.0);
        }
        assert!(leaf_of.iter().all(|&l| l != u32::MAX));
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both features split the classes identically
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64 * 2.0]).collect();
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let data = Presorted::new(&rows);
        let (tree, _) = build_tree(&data, &[1.0; 10], Target::Classes { labels: &labels, n_classes: 2 }, params(3), None);
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn constraints_hold() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![((i * 37) % 101) as f64, ((i * 53) % 97) as f64]).collect();
        let labels: Vec<usize> = (0..200).map(|i| (i * 7 + i / 3) % 3).collect();
        let data = Presorted::new(&rows);
        let p = TreeParams {
            max_depth: 4,
            min_samples_split: 10,
            min_samples_leaf: 4,
            max_features: None,
        };
        let (tree, leaf_of) = build_tree(&data, &[1.0; 200], Target::Classes { labels: &labels, n_classes: 3 }, p, None);
        assert!(tree.depth() <= 4);
        let mut sizes = std::collections::HashMap::new();
        for l in leaf_of {
            *sizes.entry(l).or_insert(0) += 1;
        }
        assert!(sizes.values().all(|&s| s >= 4));
    }

    #[test]
    fn regression_leaves_are_means() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y = [1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 7.0];
        let data = Presorted::new(&rows);
        let (tree, _) = build_tree(&data, &[1.0; 8], Target::Regression { values: &y }, params(1), None);
        assert_eq!(tree.predict(&[0.0]), &[1.0]);
        assert_eq!(tree.predict(&[7.0]), &[5.5]);
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let labels = [0, 0, 0, 1, 1, 1];
        let w = [1.0, 1.0, 0.0, 0.0, 2.0, 1.0];
        let data = Presorted::new(&rows);
        let (tree, leaf_of) = build_tree(&data, &w, Target::Classes { labels: &labels, n_classes: 2 }, params(3), None);
        assert_eq!(leaf_of[2], u32::MAX);
        assert_eq!(tree.predict(&[0.0]), &[1.0, 0.0]);
        assert_eq!(tree.predict(&[5.0]), &[0.0, 1.0]);
    }
}
