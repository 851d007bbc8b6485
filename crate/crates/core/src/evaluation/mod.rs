//! Stratified out-of-fold evaluation, threshold metrics, AUC and bootstrap
//! confidence intervals.

pub mod bootstrap;
pub mod folds;
pub mod metrics;
pub mod oof;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bootstrap::{bootstrap_ci, BootstrapConfig, Interval};
pub use folds::{stratified_kfold, FoldAssignment};
pub use metrics::{auc, confusion, threshold_labels, threshold_metrics, ConfusionCounts, Metric, MetricValue};
pub use oof::{fit_fold, run_oof, OofEntry, OofPredictions};

use crate::curation::GroupTag;
use crate::models::{ModelError, ModelKind};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 2, got {k}")]
    InvalidK { k: usize },
    #[error("cannot split {n} rows into {k} folds")]
    TooFewRows { k: usize, n: usize },
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(u8),
    #[error("{labels} labels for {rows} rows")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("fold assignment covers {folds} rows, data has {rows}")]
    FoldMismatch { folds: usize, rows: usize },
    #[error("training split for fold {fold} has a single class ({n_pos} positive, {n_neg} negative)")]
    DegenerateTrainingSplit { fold: usize, n_pos: usize, n_neg: usize },
    #[error("fitting fold {fold}: {source}")]
    Fit {
        fold: usize,
        #[source]
        source: ModelError,
    },
    #[error("no predictions to evaluate")]
    EmptyPredictions,
    #[error("invalid bootstrap settings: {0}")]
    InvalidBootstrap(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(String),
}

/// Evaluation protocol constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub k: usize,
    pub seed: u64,
    pub threshold: f64,
    pub resamples: usize,
    pub alpha: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 42,
            threshold: 0.5,
            resamples: 1000,
            alpha: 0.05,
        }
    }
}

impl Protocol {
    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            resamples: self.resamples,
            alpha: self.alpha,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.k < 2 {
            return Err(EvalError::InvalidK { k: self.k });
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(EvalError::InvalidProtocol(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        self.bootstrap().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub point: MetricValue,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub retained: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: ModelKind,
    pub group: GroupTag,
    pub n: usize,
    pub n_positive: usize,
    pub confusion: ConfusionCounts,
    pub metrics: Vec<MetricSummary>,
    pub protocol: Protocol,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> &MetricSummary {
        self.metrics
            .iter()
            .find(|m| m.metric == metric)
            .expect("report carries every metric")
    }
}

/// Point estimates and bootstrap intervals for all five metrics. The
/// metrics share one set of resamples.
pub fn metric_report(oof: &OofPredictions, protocol: &Protocol) -> Result<MetricReport, EvalError> {
    protocol.validate()?;
    if oof.is_empty() {
        return Err(EvalError::EmptyPredictions);
    }
    let y = oof.labels();
    let p = oof.scores();
    let counts = confusion(&y, &threshold_labels(&p, protocol.threshold));
    let boot = protocol.bootstrap();
    let dist = bootstrap::bootstrap_distribution(&y, &p, &Metric::ALL, protocol.threshold, boot.resamples, boot.stream());
    let metrics = Metric::ALL
        .iter()
        .zip(&dist)
        .map(|(&metric, values)| {
            let ci = bootstrap::percentile_interval(values, protocol.alpha);
            MetricSummary {
                metric,
                point: metrics::evaluate(metric, &y, &p, protocol.threshold),
                ci_low: ci.low,
                ci_high: ci.high,
                retained: ci.retained,
                discarded: ci.discarded,
            }
        })
        .collect();
    Ok(MetricReport {
        model: oof.model,
        group: oof.group,
        n: y.len(),
        n_positive: y.iter().filter(|&&v| v == 1).count(),
        confusion: counts,
        metrics,
        protocol: *protocol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_matches_single_metric_ci() {
        let entries = (0..30)
            .map(|i| OofEntry {
                record_id: format!("r{i}"),
                fold: i % 5,
                y: u8::from(i % 4 != 0),
                p_hat: ((i * 13) % 29) as f64 / 29.0,
            })
            .collect();
        let oof = OofPredictions {
            model: ModelKind::Rf,
            group: GroupTag::F3,
            entries,
        };
        let protocol = Protocol {
            resamples: 200,
            ..Protocol::default()
        };
        let r = metric_report(&oof, &protocol).unwrap();
        assert_eq!(r.metrics.len(), 5);
        assert_eq!(r.confusion.total(), 30);
        for m in Metric::ALL {
            let ci = bootstrap_ci(&oof.labels(), &oof.scores(), m, 0.5, &protocol.bootstrap()).unwrap();
            let s = r.get(m);
            assert_eq!((s.ci_low, s.ci_high, s.discarded), (ci.low, ci.high, ci.discarded));
            assert!(s.ci_low <= s.ci_high);
        }
    }
}
