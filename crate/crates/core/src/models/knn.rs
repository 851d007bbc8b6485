//! Inverse-distance weighted k-nearest neighbours on standardized features.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

impl KnnModel {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], params: &KnnParams) -> Self {
        Self {
            k: params.k,
            x: x.to_owned(),
            y: y.to_vec(),
        }
    }

    /// Neighbours are ranked by Euclidean distance, ties by training index.
    /// If any selected neighbour sits at distance zero, only the zero-distance
    /// neighbours vote, with equal weight.
    pub fn predict_row(&self, q: ArrayView1<f64>) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let d2: f64 = r.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        let k = self.k.min(dist.len());
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &dist[..k];

        let exact: Vec<usize> = nearest.iter().filter(|(d, _)| *d == 0.0).map(|(_, i)| *i).collect();
        if !exact.is_empty() {
            let pos = exact.iter().filter(|&&i| self.y[i] == 1).count();
            return pos as f64 / exact.len() as f64;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(d, i) in nearest {
            let w = 1.0 / d;
            den += w;
            if self.y[i] == 1 {
                num += w;
            }
        }
        num / den
    }
}
