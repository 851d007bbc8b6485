//! Percentile bootstrap over (y, p_hat) pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, Metric};
use super::EvalError;
use crate::rng::{StreamRng, Substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            alpha: 0.05,
            seed: 42,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.resamples == 0 {
            return Err(EvalError::InvalidBootstrap("resamples must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EvalError::InvalidBootstrap(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Generator for the resample indices. Every (model, group) cell uses the
    /// same stream, so cells with equal n see the same resamples.
    pub fn stream(&self) -> Substream {
        Substream::root(self.seed).named("bootstrap")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub retained: usize,
    pub discarded: usize,
}

/// One resample: `n` indices drawn uniformly with replacement, in order.
pub fn resample_indices(rng: &mut StreamRng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Metric values on each of `resamples` resamples; `None` where undefined.
/// All metrics are evaluated on the same resamples.
pub fn bootstrap_distribution(
    y: &[u8],
    p_hat: &[f64],
    metrics: &[Metric],
    threshold: f64,
    resamples: usize,
    stream: Substream,
) -> Vec<Vec<Option<f64>>> {
    let n = y.len();
    let mut rng = stream.rng();
    let mut out = vec![Vec::with_capacity(resamples); metrics.len()];
    let mut yb = vec![0u8; n];
    let mut pb = vec![0f64; n];
    for _ in 0..resamples {
        let idx = resample_indices(&mut rng, n);
        for (j, &i) in idx.iter().enumerate() {
            yb[j] = y[i];
            pb[j] = p_hat[i];
        }
        for (slot, &m) in out.iter_mut().zip(metrics) {
            slot.push(evaluate(m, &yb, &pb, threshold).value());
        }
    }
    out
}

/// Linear interpolation between order statistics at position `(m - 1) q`.
/// `sorted` must be ascending and non-empty.
pub fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval from a resample list; undefined entries are discarded
/// and counted.
pub fn percentile_interval(values: &[Option<f64>], alpha: f64) -> Interval {
    let mut kept: Vec<f64> = values.iter().flatten().copied().collect();
    let discarded = values.len() - kept.len();
    if kept.is_empty() {
        return Interval {
            low: None,
            high: None,
            retained: 0,
            discarded,
        };
    }
    kept.sort_by(f64::total_cmp);
    Interval {
        low: Some(quantile_linear(&kept, alpha / 2.0)),
        high: Some(quantile_linear(&kept, 1.0 - alpha / 2.0)),
        retained: kept.len(),
        discarded,
    }
}

pub fn bootstrap_ci(
    y: &[u8],
    p_hat: &[f64],
    metric: Metric,
    threshold: f64,
    config: &BootstrapConfig,
) -> Result<Interval, EvalError> {
    config.validate()?;
    if y.is_empty() {
        return Err(EvalError::EmptyPredictions);
    }
    if y.len() != p_hat.len() {
        return Err(EvalError::LabelMismatch {
            labels: y.len(),
            rows: p_hat.len(),
        });
    }
    let dist = bootstrap_distribution(y, p_hat, &[metric], threshold, config.resamples, config.stream());
    Ok(percentile_interval(&dist[0], config.alpha))
}
