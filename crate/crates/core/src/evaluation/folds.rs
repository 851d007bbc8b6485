use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::Substream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    /// Classes with fewer than `k` members; some folds lack them.
    pub sparse_classes: Vec<u8>,
}

impl FoldAssignment {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    /// `counts[fold][class]`
    pub fn class_counts(&self, labels: &[u8]) -> Vec<[usize; 2]> {
        let mut counts = vec![[0usize; 2]; self.k];
        for (&f, &y) in self.fold_of.iter().zip(labels) {
            counts[f][usize::from(y)] += 1;
        }
        counts
    }
}

/// Shuffles each class with the seeded generator (negatives first, then
/// positives) and deals the indices round-robin over the folds. Dealing
/// continues where the previous class stopped, so fold sizes stay within one
/// of each other as well.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldAssignment, EvalError> {
    use rand::seq::SliceRandom;

    let n = labels.len();
    if k < 2 {
        return Err(EvalError::InvalidK { k });
    }
    if k > n {
        return Err(EvalError::TooFewRows { k, n });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(EvalError::NonBinaryLabel(bad));
    }

    let mut rng = Substream::root(seed).named("stratified-kfold").rng();
    let mut fold_of = vec![0usize; n];
    let mut sparse_classes = Vec::new();
    let mut next = 0usize;
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            sparse_classes.push(class);
        }
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment {
        fold_of,
        k,
        seed,
        sparse_classes,
    })
}
