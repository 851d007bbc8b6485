//! Newton boosting of shallow regression trees on the logistic loss.
//!
//! Raw scores start at 0. Each round takes gradient `p - y` and hessian
//! `p (1 - p)` at the current scores, fits a depth-limited tree on a row and
//! column subsample, sets each leaf to `-G / (H + lambda)` and adds the
//! shrunken tree to the ensemble.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{Entry, Grower, Newton, Node, Stats, Tree};
use crate::rng::{StreamRng, Substream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub row_subsample: f64,
    pub col_subsample: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            rounds: 200,
            max_depth: 3,
            learning_rate: 0.1,
            row_subsample: 0.8,
            col_subsample: 0.8,
            lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 1.0,
        }
    }
}

/// Leaf values are stored already multiplied by the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

fn subsample(rng: &mut StreamRng, n: usize, fraction: f64) -> Vec<usize> {
    let take = ((fraction * n as f64).round() as usize).clamp(1, n);
    if take == n {
        return (0..n).collect();
    }
    let mut picked = index::sample(rng, n, take).into_vec();
    picked.sort_unstable();
    picked
}

/// Mean logistic loss of raw scores.
pub fn logistic_loss(raw: &[f64], y: &[u8]) -> f64 {
    raw.iter()
        .zip(y)
        .map(|(&z, &yi)| z.max(0.0) + (-z.abs()).exp().ln_1p() - f64::from(yi) * z)
        .sum::<f64>()
        / raw.len() as f64
}

/// Fits the ensemble and returns the training loss before the first round
/// and after every round.
pub fn fit_with_history(
    x: ArrayView2<f64>,
    y: &[u8],
    params: &BoostParams,
    stream: Substream,
) -> (BoostedModel, Vec<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let base_score = 0.0;
    let mut raw = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut history = vec![logistic_loss(&raw, y)];
    let criterion = Newton {
        lambda: params.lambda,
        gamma: params.gamma,
        min_child_hessian: params.min_child_hessian,
    };

    for round in 0..params.rounds {
        let mut rng = stream.child(round as u64).rng();
        let rows = subsample(&mut rng, n, params.row_subsample);
        let features = if p == 0 {
            Vec::new()
        } else {
            subsample(&mut rng, p, params.col_subsample)
        };
        let entries = rows
            .iter()
            .map(|&row| {
                let prob = sigmoid(raw[row]);
                Entry {
                    row,
                    stats: Stats {
                        a: prob - f64::from(y[row]),
                        b: prob * (1.0 - prob),
                        count: 1,
                    },
                }
            })
            .collect();
        let mut tree = Grower {
            x,
            criterion: &criterion,
            max_depth: params.max_depth,
            features,
            sampler: None,
        }
        .grow(entries);
        for node in &mut tree.nodes {
            if let Node::Leaf { value } = node {
                *value *= params.learning_rate;
            }
        }
        for (r, row) in raw.iter_mut().zip(x.rows()) {
            *r += tree.predict_row(row);
        }
        history.push(logistic_loss(&raw, y));
        trees.push(tree);
    }
    (BoostedModel { base_score, trees }, history)
}

pub fn fit(x: ArrayView2<f64>, y: &[u8], params: &BoostParams, stream: Substream) -> BoostedModel {
    fit_with_history(x, y, params, stream).0
}

impl BoostedModel {
    pub fn raw_score(&self, row: ArrayView1<f64>) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        sigmoid(self.raw_score(row))
    }
}
