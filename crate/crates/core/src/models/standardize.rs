//! Fold-local z-scoring. Columns with more than two distinct values are
//! standardized with the population standard deviation; binary columns pass
//! through untouched.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    Binary,
}

impl ColumnKind {
    pub fn infer(column: ArrayView1<f64>) -> Self {
        let mut distinct: Vec<f64> = column.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| a == b);
        if distinct.len() > 2 {
            Self::Continuous
        } else {
            Self::Binary
        }
    }

    pub fn infer_all(x: ArrayView2<f64>) -> Vec<Self> {
        x.columns().into_iter().map(Self::infer).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnScale {
    PassThrough,
    Standardize { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerParams {
    pub columns: Vec<ColumnScale>,
    /// Standardized columns whose fitted deviation was zero; they map to 0.
    pub zero_variance: Vec<usize>,
}

pub fn fit_standardizer(x: ArrayView2<f64>, kinds: &[ColumnKind]) -> StandardizerParams {
    assert_eq!(x.ncols(), kinds.len(), "one kind per column");
    let n = x.nrows() as f64;
    let mut zero_variance = Vec::new();
    let columns = kinds
        .iter()
        .enumerate()
        .map(|(j, kind)| match kind {
            ColumnKind::Binary => ColumnScale::PassThrough,
            ColumnKind::Continuous => {
                let col = x.column(j);
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd == 0.0 {
                    zero_variance.push(j);
                }
                ColumnScale::Standardize { mean, sd }
            }
        })
        .collect();
    StandardizerParams {
        columns,
        zero_variance,
    }
}

impl StandardizerParams {
    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, scale) in self.columns.iter().enumerate() {
            if let ColumnScale::Standardize { mean, sd } = *scale {
                out.column_mut(j).mapv_inplace(|v| if sd == 0.0 { 0.0 } else { (v - mean) / sd });
            }
        }
        out
    }
}
