//! L2-penalized logistic regression fitted by damped Newton iterations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2_lambda: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls to this value.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2_lambda: 1e-3,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective value after each accepted iterate, starting at the origin.
    pub loss_history: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Objective `mean(log-loss) + lambda/2 |w|^2`, intercept unpenalized.
pub fn objective(x: &Matrix, y: &[bool], weights: &[f64], intercept: f64, lambda: f64) -> f64 {
    let n = x.rows() as f64;
    let data: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, &yi)| {
            let z = intercept + dot(r, weights);
            softplus(z) - if yi { z } else { 0.0 }
        })
        .sum();
    data / n + 0.5 * lambda * dot(weights, weights)
}

/// Gradient of [`objective`]; the last entry is the intercept component.
pub fn gradient(x: &Matrix, y: &[bool], weights: &[f64], intercept: f64, lambda: f64) -> Vec<f64> {
    let d = x.cols();
    let n = x.rows() as f64;
    let mut g = vec![0.0; d + 1];
    for (r, &yi) in x.iter_rows().zip(y) {
        let resid = sigmoid(intercept + dot(r, weights)) - if yi { 1.0 } else { 0.0 };
        for (gj, xj) in g.iter_mut().zip(r) {
            *gj += resid * xj;
        }
        g[d] += resid;
    }
    for j in 0..=d {
        g[j] /= n;
    }
    for j in 0..d {
        g[j] += lambda * weights[j];
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hessian(x: &Matrix, weights: &[f64], intercept: f64, lambda: f64) -> DMatrix<f64> {
    let d = x.cols();
    let n = x.rows() as f64;
    let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut aug = vec![0.0; d + 1];
    for r in x.iter_rows() {
        let p = sigmoid(intercept + dot(r, weights));
        let s = p * (1.0 - p);
        aug[..d].copy_from_slice(r);
        aug[d] = 1.0;
        for a in 0..=d {
            let sa = s * aug[a];
            if sa == 0.0 {
                continue;
            }
            for b in a..=d {
                h[(a, b)] += sa * aug[b];
            }
        }
    }
    for a in 0..=d {
        for b in a..=d {
            h[(a, b)] /= n;
            h[(b, a)] = h[(a, b)];
        }
    }
    for a in 0..d {
        h[(a, a)] += lambda;
    }
    h
}

fn solve_spd(h: DMatrix<f64>, g: &[f64]) -> Option<DVector<f64>> {
    let rhs = DVector::from_column_slice(g);
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    // near-singular Hessian (e.g. separable data with lambda = 0)
    let dim = h.nrows();
    let ridge = 1e-8 * (1.0 + h.diagonal().amax());
    let damped = h + DMatrix::<f64>::identity(dim, dim) * ridge;
    damped.cholesky().map(|ch| ch.solve(&rhs))
}

impl LogisticModel {
    pub fn fit(x: &Matrix, y: &[bool], params: &LogisticParams) -> Result<Self> {
        if x.rows() != y.len() || x.rows() == 0 {
            return Err(Error::invalid("logistic regression needs matching, non-empty x and y"));
        }
        if x.has_missing() {
            return Err(Error::Model("logistic regression requires complete features".into()));
        }
        if !y.iter().any(|&b| b) || y.iter().all(|&b| b) {
            return Err(Error::invalid("logistic regression needs both classes"));
        }
        if !(params.l2_lambda >= 0.0) || params.max_iter == 0 || !(params.tol > 0.0) {
            return Err(Error::Config("invalid logistic hyperparameters".into()));
        }
        let d = x.cols();
        let lambda = params.l2_lambda;
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut loss = objective(x, y, &w, b, lambda);
        let mut history = vec![loss];
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..params.max_iter {
            let g = gradient(x, y, &w, b, lambda);
            if dot(&g, &g).sqrt() <= params.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let Some(step) = solve_spd(hessian(x, &w, b, lambda), &g) else {
                break;
            };
            // step halving until the objective does not increase
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-10 {
                let w_new: Vec<f64> = (0..d).map(|j| w[j] - t * step[j]).collect();
                let b_new = b - t * step[d];
                let l_new = objective(x, y, &w_new, b_new, lambda);
                if l_new.is_finite() && l_new <= loss {
                    w = w_new;
                    b = b_new;
                    loss = l_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            history.push(loss);
        }
        if !converged {
            let g = gradient(x, y, &w, b, lambda);
            converged = dot(&g, &g).sqrt() <= params.tol;
        }
        Ok(LogisticModel {
            weights: w,
            intercept: b,
            converged,
            iterations,
            loss_history: history,
        })
    }

    pub fn margin_row(&self, x: &[f64]) -> f64 {
        self.intercept + dot(x, &self.weights)
    }
}
