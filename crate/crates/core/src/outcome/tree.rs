//! CART-style classification trees on Gini impurity, and bagged forests.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, CLASSES};

/// Gains closer than this are treated as equal, so float noise cannot
/// reorder otherwise tied splits.
const GAIN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Weighted class proportions of the training rows that reached it.
    Leaf { distribution: [f64; CLASSES] },
}

/// Nodes in preorder; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

pub(super) struct GrowOptions {
    pub max_depth: Option<usize>,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

fn gini(weights: &[f64; CLASSES]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - weights.iter().map(|w| (w / total) * (w / total)).sum::<f64>()
}

struct Builder<'a, 'r> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    w: &'a [f64],
    options: &'a GrowOptions,
    rng: Option<&'r mut ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Builder<'_, '_> {
    fn class_weights(&self, rows: &[usize]) -> [f64; CLASSES] {
        let mut cw = [0.0; CLASSES];
        for &i in rows {
            cw[self.y[i]] += self.w[i];
        }
        cw
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let width = self.x.first().map_or(0, Vec::len);
        match (self.options.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < width => {
                let mut f = sample(rng, width, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..width).collect(),
        }
    }

    /// Best `(feature, threshold)` by Gini gain. Zero-gain splits are
    /// accepted so that interactions such as XOR stay learnable.
    fn best_split(&mut self, rows: &[usize], parent: &[f64; CLASSES]) -> Option<(usize, f64)> {
        let total: f64 = parent.iter().sum();
        let parent_gini = gini(parent);
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in self.candidate_features() {
            let mut sorted: Vec<usize> = rows.to_vec();
            sorted.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut left = [0.0; CLASSES];
            for pos in 0..sorted.len() - 1 {
                let i = sorted[pos];
                left[self.y[i]] += self.w[i];
                let (here, next) = (self.x[i][feature], self.x[sorted[pos + 1]][feature]);
                if here == next {
                    continue;
                }
                let right: [f64; CLASSES] = std::array::from_fn(|c| parent[c] - left[c]);
                let wl: f64 = left.iter().sum();
                let children = (wl * gini(&left) + (total - wl) * gini(&right)) / total;
                let gain = parent_gini - children;
                if best.is_none_or(|(g, _, _)| gain > g + GAIN_EPSILON) {
                    best = Some((gain, feature, here + (next - here) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let cw = self.class_weights(rows);
        let total: f64 = cw.iter().sum();
        let leaf = Node::Leaf { distribution: cw.map(|c| if total > 0.0 { c / total } else { 0.0 }) };
        self.nodes.push(leaf);
        let depth_left = self.options.max_depth.is_none_or(|d| depth < d);
        if !depth_left || rows.len() < 2 || gini(&cw) == 0.0 {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, &cw) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(&l, depth + 1);
        let right = self.build(&r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl Tree {
    pub(super) fn grow(
        x: &[Vec<f64>],
        y: &[usize],
        w: &[f64],
        options: &GrowOptions,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Tree {
        let rows: Vec<usize> = (0..y.len()).collect();
        Self::grow_rows(x, y, w, &rows, options, rng)
    }

    fn grow_rows(
        x: &[Vec<f64>],
        y: &[usize],
        w: &[f64],
        rows: &[usize],
        options: &GrowOptions,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Tree {
        let mut b = Builder { x, y, w, options, rng, nodes: Vec::new() };
        b.build(rows, 0);
        Tree { nodes: b.nodes }
    }

    pub fn probabilities(&self, x: &[f64]) -> [f64; CLASSES] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { distribution } => return *distribution,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Children must point forward so prediction always terminates.
    pub(super) fn validate(&self, width: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { feature, left, right, .. } = node {
                if *feature >= width {
                    return Err(format!("node {i} splits on feature {feature} of {width}"));
                }
                if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return Err(format!("node {i} has invalid children"));
                }
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn grow_forest(
    x: &[Vec<f64>],
    y: &[usize],
    w: &[f64],
    trees: usize,
    max_depth: Option<usize>,
    max_features: Option<usize>,
    bootstrap: bool,
    seed: u64,
) -> Vec<Tree> {
    let width = x.first().map_or(0, Vec::len);
    let m = max_features.unwrap_or_else(|| (width as f64).sqrt().ceil() as usize).max(1);
    let options = GrowOptions { max_depth, max_features: Some(m) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = y.len();
    (0..trees.max(1))
        .map(|_| {
            let rows: Vec<usize> =
                if bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            Tree::grow_rows(x, y, w, &rows, &options, Some(&mut rng))
        })
        .collect()
}

/// Share of trees voting for each class.
pub(super) fn vote_probabilities(trees: &[Tree], x: &[f64]) -> [f64; CLASSES] {
    let mut votes = [0.0; CLASSES];
    for t in trees {
        votes[argmax(&t.probabilities(x))] += 1.0;
    }
    votes
}
