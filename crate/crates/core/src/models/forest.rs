//! Bagged CART ensemble with per-split feature subsampling.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Entry, FeatureSampler, Gini, Grower, Stats, Tree};
use super::{ClassWeights, TreeParams};
use crate::rng::Substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

/// floor(sqrt(p)), at least one.
pub fn features_per_split(p: usize) -> usize {
    ((p as f64).sqrt().floor() as usize).max(1)
}

/// Tree `t` draws its bootstrap sample and split features from
/// `stream.child(t)`, so the fitted forest does not depend on how trees are
/// scheduled across threads.
pub fn fit(
    x: ArrayView2<f64>,
    y: &[u8],
    weights: &ClassWeights,
    params: &ForestParams,
    stream: Substream,
) -> ForestModel {
    let n = x.nrows();
    let p = x.ncols();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.child(t as u64).rng();
            let entries: Vec<Entry> = (0..n)
                .map(|_| {
                    let row = rng.random_range(0..n);
                    let w = weights.for_label(y[row]);
                    let pos = y[row] == 1;
                    Entry {
                        row,
                        stats: Stats {
                            a: if pos { w } else { 0.0 },
                            b: if pos { 0.0 } else { w },
                            count: 1,
                        },
                    }
                })
                .collect();
            Grower {
                x,
                criterion: &Gini {
                    min_samples_leaf: params.tree.min_samples_leaf,
                },
                max_depth: params.tree.max_depth,
                features: (0..p).collect(),
                sampler: Some(FeatureSampler {
                    per_split: features_per_split(p),
                    rng: &mut rng,
                }),
            }
            .grow(entries)
        })
        .collect();
    ForestModel { trees }
}

impl ForestModel {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}
