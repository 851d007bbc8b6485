//! Binary split trees shared by the CART classifier, the forest, and the
//! boosted ensemble. A tree is grown depth first from a list of sample
//! entries; each entry carries two additive statistics whose meaning depends
//! on the criterion (weighted positive/negative mass for Gini, gradient and
//! hessian sums for Newton boosting).

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Node array with the root at index 0. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Stats {
    pub a: f64,
    pub b: f64,
    pub count: usize,
}

impl Stats {
    fn add(&mut self, o: Stats) {
        self.a += o.a;
        self.b += o.b;
        self.count += o.count;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            a: self.a - o.a,
            b: self.b - o.b,
            count: self.count - o.count,
        }
    }
}

pub(crate) trait Criterion {
    fn leaf_value(&self, s: Stats) -> f64;
    /// Whether a node with these statistics may be split at all.
    fn can_split(&self, s: Stats) -> bool;
    fn child_ok(&self, s: Stats) -> bool;
    fn gain(&self, parent: Stats, left: Stats, right: Stats) -> f64;
}

/// Weighted Gini impurity; `a` = positive weight, `b` = negative weight.
pub(crate) struct Gini {
    pub min_samples_leaf: usize,
}

fn gini_mass(s: Stats) -> f64 {
    // W * gini = W - (a^2 + b^2) / W
    let w = s.a + s.b;
    if w <= 0.0 {
        0.0
    } else {
        w - (s.a * s.a + s.b * s.b) / w
    }
}

impl Criterion for Gini {
    fn leaf_value(&self, s: Stats) -> f64 {
        let w = s.a + s.b;
        if w > 0.0 {
            s.a / w
        } else {
            0.0
        }
    }

    fn can_split(&self, s: Stats) -> bool {
        s.count >= 2 * self.min_samples_leaf && s.a > 0.0 && s.b > 0.0
    }

    fn child_ok(&self, s: Stats) -> bool {
        s.count >= self.min_samples_leaf
    }

    fn gain(&self, parent: Stats, left: Stats, right: Stats) -> f64 {
        gini_mass(parent) - gini_mass(left) - gini_mass(right)
    }
}

/// Second-order boosting criterion; `a` = gradient sum, `b` = hessian sum.
pub(crate) struct Newton {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
}

impl Criterion for Newton {
    fn leaf_value(&self, s: Stats) -> f64 {
        -s.a / (s.b + self.lambda)
    }

    fn can_split(&self, s: Stats) -> bool {
        s.count >= 2
    }

    fn child_ok(&self, s: Stats) -> bool {
        s.b >= self.min_child_hessian
    }

    fn gain(&self, p: Stats, l: Stats, r: Stats) -> f64 {
        let score = |s: Stats| s.a * s.a / (s.b + self.lambda);
        0.5 * (score(l) + score(r) - score(p)) - self.gamma
    }
}

pub(crate) struct Entry {
    pub row: usize,
    pub stats: Stats,
}

/// Per-node feature subsampling (random forest style).
pub(crate) struct FeatureSampler<'r> {
    pub per_split: usize,
    pub rng: &'r mut StreamRng,
}

pub(crate) struct Grower<'a, 'r, C: Criterion> {
    pub x: ArrayView2<'a, f64>,
    pub criterion: &'a C,
    pub max_depth: usize,
    /// Candidate features (ascending). Node-level sampling draws from these.
    pub features: Vec<usize>,
    pub sampler: Option<FeatureSampler<'r>>,
}

// Splits whose gain does not clear this (relative to the node mass) are
// treated as no improvement.
const MIN_RELATIVE_GAIN: f64 = 1e-12;

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<C: Criterion> Grower<'_, '_, C> {
    pub fn grow(mut self, entries: Vec<Entry>) -> Tree {
        let mut nodes = Vec::new();
        self.build(entries, 0, &mut nodes);
        Tree { nodes }
    }

    fn build(&mut self, mut entries: Vec<Entry>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let mut total = Stats::default();
        for e in &entries {
            total.add(e.stats);
        }
        let id = nodes.len();
        nodes.push(Node::Leaf {
            value: self.criterion.leaf_value(total),
        });
        if depth >= self.max_depth || !self.criterion.can_split(total) {
            return id;
        }

        let candidates = self.node_features();
        let Some(best) = self.best_split(&mut entries, total, &candidates) else {
            return id;
        };
        let (left, right): (Vec<Entry>, Vec<Entry>) = entries
            .into_iter()
            .partition(|e| self.x[[e.row, best.feature]] <= best.threshold);
        let left_id = self.build(left, depth + 1, nodes);
        let right_id = self.build(right, depth + 1, nodes);
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left_id,
            right: right_id,
        };
        id
    }

    fn node_features(&mut self) -> Vec<usize> {
        match &mut self.sampler {
            Some(s) if s.per_split < self.features.len() => {
                let mut picked: Vec<usize> = index::sample(s.rng, self.features.len(), s.per_split)
                    .into_iter()
                    .map(|i| self.features[i])
                    .collect();
                picked.sort_unstable();
                picked
            }
            _ => self.features.clone(),
        }
    }

    /// Exhaustive scan over midpoints of consecutive distinct values. Ties
    /// keep the first candidate found: lowest feature, then lowest threshold.
    fn best_split(
        &self,
        entries: &mut [Entry],
        total: Stats,
        features: &[usize],
    ) -> Option<BestSplit> {
        let min_gain = MIN_RELATIVE_GAIN * (total.b.abs() + total.a.abs()).max(1.0);
        let mut best: Option<BestSplit> = None;
        for &f in features {
            entries.sort_by(|p, q| {
                self.x[[p.row, f]]
                    .total_cmp(&self.x[[q.row, f]])
                    .then(p.row.cmp(&q.row))
            });
            let mut left = Stats::default();
            for i in 0..entries.len() - 1 {
                left.add(entries[i].stats);
                let lo = self.x[[entries[i].row, f]];
                let hi = self.x[[entries[i + 1].row, f]];
                if lo == hi {
                    continue;
                }
                let right = total.minus(left);
                if !self.criterion.child_ok(left) || !self.criterion.child_ok(right) {
                    continue;
                }
                let gain = self.criterion.gain(total, left, right);
                if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}
