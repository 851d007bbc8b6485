//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::path::Path;

use ptrs::curation::{curate, CuratedDataset, CurationConfig};
use ptrs::ingest::{parse_raw, Schema};
use ptrs::synth::{generate, SynthCohort, SynthConfig};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// O(n^2) pairwise AUC, ties one half. `None` for a single class.
pub fn pairwise_auc(y: &[u8], p: &[f64]) -> Option<f64> {
    let mut score = 0.0f64;
    let n_pos = y.iter().filter(|&&v| v == 1).count() as u64;
    let n_neg = y.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    for i in 0..y.len() {
        if y[i] != 1 {
            continue;
        }
        for j in 0..y.len() {
            if y[j] != 0 {
                continue;
            }
            if p[i] > p[j] {
                score += 1.0;
            } else if p[i] == p[j] {
                score += 0.5;
            }
        }
    }
    Some(score / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direct {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

/// Confusion counts and the four threshold metrics straight from their
/// definitions; `None` where a denominator is zero.
pub fn direct_metrics(y: &[u8], y_hat: &[u8]) -> Direct {
    let count = |a: u8, b: u8| y.iter().zip(y_hat).filter(|(&t, &p)| t == a && p == b).count();
    let (tp, tn, fp, fn_) = (count(1, 1), count(0, 0), count(0, 1), count(1, 0));
    let div = |a: usize, b: usize| if b == 0 { None } else { Some(a as f64 / b as f64) };
    let sensitivity = div(tp, tp + fn_);
    let precision = div(tp, tp + fp);
    let f1 = match (precision, sensitivity) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        _ => None,
    };
    Direct {
        tp,
        tn,
        fp,
        fn_,
        sensitivity,
        specificity: div(tn, tn + fp),
        precision,
        f1,
    }
}

/// Linear-interpolation quantile over a sorted list, position (m - 1) q.
pub fn naive_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() as f64 - 1.0);
    let below = pos.floor();
    let i = below as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = pos - below;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Random binary labels with both classes present.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, prevalence: f64) -> Vec<u8> {
    loop {
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < prevalence)).collect();
        if y.contains(&0) && y.contains(&1) {
            return y;
        }
    }
}

pub fn cohort(config: &SynthConfig) -> (SynthCohort, CuratedDataset) {
    let c = generate(config).expect("valid synth config");
    let records = parse_raw(&c.csv, &Schema::default()).expect("synthetic cohort parses");
    let ds = curate(&records, &CurationConfig::default()).expect("synthetic cohort curates");
    (c, ds)
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
