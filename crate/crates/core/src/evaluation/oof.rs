//! Out-of-fold prediction harness.

use std::io::{Read, Write};

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::folds::FoldAssignment;
use super::EvalError;
use crate::curation::GroupTag;
use crate::models::{fit_pipeline, FittedPipeline, ModelError, ModelKind, ModelSpec};
use crate::rng::Substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofEntry {
    pub record_id: String,
    pub fold: usize,
    pub y: u8,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofPredictions {
    pub model: ModelKind,
    pub group: GroupTag,
    pub entries: Vec<OofEntry>,
}

impl OofPredictions {
    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.y).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.p_hat).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Delimited dump with header `record_id,fold,y,p_hat`. Probabilities are
    /// written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["record_id", "fold", "y", "p_hat"])?;
        for e in &self.entries {
            w.write_record([
                e.record_id.as_str(),
                &e.fold.to_string(),
                &e.y.to_string(),
                &format!("{:?}", e.p_hat),
            ])?;
        }
        w.flush().map_err(|e| EvalError::Io(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, model: ModelKind, group: GroupTag) -> Result<Self, EvalError> {
        let mut r = csv::Reader::from_reader(input);
        let mut entries = Vec::new();
        for row in r.deserialize() {
            entries.push(row?);
        }
        Ok(Self { model, group, entries })
    }
}

/// Standardizer and model fitted on every row outside `fold`.
pub fn fit_fold(
    x: ArrayView2<f64>,
    labels: &[u8],
    spec: &ModelSpec,
    folds: &FoldAssignment,
    fold: usize,
    stream: Substream,
) -> Result<FittedPipeline, EvalError> {
    let train = folds.train_rows(fold);
    let y: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(EvalError::DegenerateTrainingSplit {
            fold,
            n_pos,
            n_neg: y.len() - n_pos,
        });
    }
    let xt = x.select(Axis(0), &train);
    fit_pipeline(spec, xt.view(), &y, stream.child(fold as u64)).map_err(|source| EvalError::Fit { fold, source })
}

/// Fits one pipeline per fold and predicts its held-out rows. `stream` is
/// the cell's substream; fold `f` fits with `stream.child(f)`.
pub fn run_oof(
    x: ArrayView2<f64>,
    labels: &[u8],
    row_ids: &[String],
    spec: &ModelSpec,
    folds: &FoldAssignment,
    group: GroupTag,
    stream: Substream,
) -> Result<OofPredictions, EvalError> {
    let n = x.nrows();
    if labels.len() != n || row_ids.len() != n {
        return Err(EvalError::LabelMismatch {
            labels: labels.len(),
            rows: n,
        });
    }
    if folds.fold_of.len() != n {
        return Err(EvalError::FoldMismatch {
            folds: folds.fold_of.len(),
            rows: n,
        });
    }
    let mut p_hat = vec![f64::NAN; n];
    for fold in 0..folds.k {
        let test = folds.test_rows(fold);
        if test.is_empty() {
            continue;
        }
        let pipeline = fit_fold(x, labels, spec, folds, fold, stream)?;
        let xs = x.select(Axis(0), &test);
        let probs = pipeline
            .predict_proba(xs.view())
            .map_err(|source: ModelError| EvalError::Fit { fold, source })?;
        for (&i, p) in test.iter().zip(probs) {
            p_hat[i] = p;
        }
    }
    Ok(OofPredictions {
        model: spec.kind(),
        group,
        entries: (0..n)
            .map(|i| OofEntry {
                record_id: row_ids[i].clone(),
                fold: folds.fold_of[i],
                y: labels[i],
                p_hat: p_hat[i],
            })
            .collect(),
    })
}
