//! L2-regularized, class-weighted logistic regression solved by damped
//! Newton iterations with backtracking line search. The intercept is not
//! penalized.
//!
//! Parameters are laid out as `theta = [w_0, .., w_{p-1}, b]`.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::ClassWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub balanced: bool,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            balanced: true,
            gradient_tolerance: 1e-8,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn linear(theta: &[f64], row: ArrayView1<f64>) -> f64 {
    let p = row.len();
    row.iter().zip(&theta[..p]).map(|(x, w)| x * w).sum::<f64>() + theta[p]
}

fn sample_weight(weights: &ClassWeights, y: u8) -> f64 {
    if y == 1 {
        weights.w_pos
    } else {
        weights.w_neg
    }
}

/// Σ_i s_i · logloss(y_i, σ(w·x_i + b)) + ‖w‖² / (2C)
pub fn objective(theta: &[f64], x: ArrayView2<f64>, y: &[u8], weights: &ClassWeights, c: f64) -> f64 {
    let p = x.ncols();
    let data: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &yi)| {
            let z = linear(theta, row);
            sample_weight(weights, yi) * (softplus(z) - f64::from(yi) * z)
        })
        .sum();
    let penalty: f64 = theta[..p].iter().map(|w| w * w).sum::<f64>() / (2.0 * c);
    data + penalty
}

pub fn gradient(theta: &[f64], x: ArrayView2<f64>, y: &[u8], weights: &ClassWeights, c: f64) -> Vec<f64> {
    let p = x.ncols();
    let mut g = vec![0.0; p + 1];
    for (row, &yi) in x.rows().into_iter().zip(y) {
        let r = sample_weight(weights, yi) * (sigmoid(linear(theta, row)) - f64::from(yi));
        for (gj, xj) in g.iter_mut().zip(row.iter()) {
            *gj += r * xj;
        }
        g[p] += r;
    }
    for j in 0..p {
        g[j] += theta[j] / c;
    }
    g
}

fn hessian(theta: &[f64], x: ArrayView2<f64>, y: &[u8], weights: &ClassWeights, c: f64) -> DMatrix<f64> {
    let p = x.ncols();
    let mut h = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut xt = vec![1.0; p + 1];
    for (row, &yi) in x.rows().into_iter().zip(y) {
        let s = sigmoid(linear(theta, row));
        let d = sample_weight(weights, yi) * s * (1.0 - s);
        for (t, v) in xt.iter_mut().zip(row.iter()) {
            *t = *v;
        }
        for a in 0..=p {
            let da = d * xt[a];
            for b in a..=p {
                h[(a, b)] += da * xt[b];
            }
        }
    }
    for a in 0..=p {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    for j in 0..p {
        h[(j, j)] += 1.0 / c;
    }
    h
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton direction, adding diagonal damping until the system is positive definite.
fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Option<DVector<f64>> {
    let rhs = -DVector::from_column_slice(g);
    let scale = h.diagonal().amax().max(1.0);
    let mut damping = 0.0;
    for _ in 0..30 {
        let mut hd = h.clone();
        for i in 0..hd.nrows() {
            hd[(i, i)] += damping;
        }
        if let Some(chol) = hd.cholesky() {
            return Some(chol.solve(&rhs));
        }
        damping = if damping == 0.0 { 1e-10 * scale } else { damping * 10.0 };
    }
    None
}

pub fn fit(x: ArrayView2<f64>, y: &[u8], weights: &ClassWeights, params: &LogisticParams) -> LogisticModel {
    let p = x.ncols();
    let c = params.c;
    let mut theta = vec![0.0; p + 1];
    let mut f = objective(&theta, x, y, weights, c);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iterations {
        let g = gradient(&theta, x, y, weights, c);
        if max_abs(&g) < params.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let Some(dir) = newton_direction(hessian(&theta, x, y, weights, c), &g) else {
            break;
        };
        let slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        let (dir, slope) = if slope < 0.0 {
            (dir.as_slice().to_vec(), slope)
        } else {
            // not a descent direction; fall back to steepest descent
            let sd: Vec<f64> = g.iter().map(|v| -v).collect();
            let s = -g.iter().map(|v| v * v).sum::<f64>();
            (sd, s)
        };

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let fc = objective(&cand, x, y, weights, c);
            if fc <= f + 1e-4 * step * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // at the floating-point floor of the objective
            converged = max_abs(&gradient(&theta, x, y, weights, c)) < params.gradient_tolerance.sqrt();
            break;
        }
    }

    LogisticModel {
        weights: theta[..p].to_vec(),
        intercept: theta[p],
        iterations,
        converged,
    }
}

impl LogisticModel {
    pub fn decision(&self, row: ArrayView1<f64>) -> f64 {
        row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>() + self.intercept
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        sigmoid(self.decision(row))
    }
}
