//! Threshold metrics from confusion counts and the Mann-Whitney AUC.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auc,
    Sensitivity,
    Specificity,
    Precision,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Auc,
        Metric::Sensitivity,
        Metric::Specificity,
        Metric::Precision,
        Metric::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Auc => "auc",
            Self::Sensitivity => "sensitivity",
            Self::Specificity => "specificity",
            Self::Precision => "precision",
            Self::F1 => "f1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A metric value together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum MetricValue {
    Defined(f64),
    /// Denominator was zero; the value is the documented policy value.
    ZeroDivision(f64),
    /// No meaningful value exists (e.g. a single-class sample).
    Undefined,
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Defined(v) | Self::ZeroDivision(v) => Some(v),
            Self::Undefined => None,
        }
    }

    pub fn is_zero_division(self) -> bool {
        matches!(self, Self::ZeroDivision(_))
    }
}

/// `p >= threshold` is called positive.
pub fn threshold_labels(p_hat: &[f64], threshold: f64) -> Vec<u8> {
    p_hat.iter().map(|&p| u8::from(p >= threshold)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(y: &[u8], y_hat: &[u8]) -> ConfusionCounts {
    assert_eq!(y.len(), y_hat.len(), "label vectors must have equal length");
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y.iter().zip(y_hat) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (0, _) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub sensitivity: MetricValue,
    pub specificity: MetricValue,
    pub precision: MetricValue,
    pub f1: MetricValue,
}

fn ratio(num: usize, den: usize) -> MetricValue {
    if den == 0 {
        MetricValue::Undefined
    } else {
        MetricValue::Defined(num as f64 / den as f64)
    }
}

/// Zero-division policy: precision is 0 (flagged) when nothing is called
/// positive; F1 is 0 (flagged) when precision + sensitivity = 0. Sensitivity
/// without positives and specificity without negatives are undefined.
pub fn threshold_metrics(c: &ConfusionCounts) -> ThresholdMetrics {
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.tn + c.fp);
    let precision = if c.tp + c.fp == 0 {
        MetricValue::ZeroDivision(0.0)
    } else {
        MetricValue::Defined(c.tp as f64 / (c.tp + c.fp) as f64)
    };
    let f1 = match (precision.value(), sensitivity.value()) {
        (Some(p), Some(s)) if p + s == 0.0 => MetricValue::ZeroDivision(0.0),
        (Some(p), Some(s)) => MetricValue::Defined(2.0 * p * s / (p + s)),
        _ => MetricValue::Undefined,
    };
    ThresholdMetrics {
        sensitivity,
        specificity,
        precision,
        f1,
    }
}

/// Probability that a random positive outranks a random negative, ties
/// counted one half. Computed from tie groups after one sort; the count is
/// kept in integers (doubled) so the result equals the pairwise definition
/// exactly. `None` when either class is absent.
pub fn auc(y: &[u8], p_hat: &[f64]) -> Option<f64> {
    assert_eq!(y.len(), p_hat.len(), "labels and scores must have equal length");
    let n_pos = y.iter().filter(|&&v| v == 1).count() as u64;
    let n_neg = y.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| p_hat[a].total_cmp(&p_hat[b]));

    let mut twice_wins: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && p_hat[order[j]] == p_hat[order[i]] {
            if y[order[j]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_wins += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Some(twice_wins as f64 / (2 * n_pos * n_neg) as f64)
}

/// Evaluates one metric on labels and scores.
pub fn evaluate(metric: Metric, y: &[u8], p_hat: &[f64], threshold: f64) -> MetricValue {
    if metric == Metric::Auc {
        return auc(y, p_hat).map_or(MetricValue::Undefined, MetricValue::Defined);
    }
    let m = threshold_metrics(&confusion(y, &threshold_labels(p_hat, threshold)));
    match metric {
        Metric::Sensitivity => m.sensitivity,
        Metric::Specificity => m.specificity,
        Metric::Precision => m.precision,
        Metric::F1 => m.f1,
        Metric::Auc => unreachable!(),
    }
}
