//! One-hidden-layer ReLU network with a sigmoid output.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{he_uniform, sigmoid, softplus, Adam};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden_width: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_width: 32,
            epochs: 200,
            learning_rate: 1e-3,
            l2_lambda: 1e-4,
            batch_size: 128,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.batch_size == 0 {
            return Err(Error::Config("mlp hidden_width and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.l2_lambda >= 0.0) {
            return Err(Error::Config("mlp learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters laid out flat as `[W1 (h x d, row-major), b1 (h), w2 (h), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    pub hidden_width: usize,
    pub params: Vec<f64>,
}

impl MlpModel {
    /// Random hidden layer, zero output layer: every initial probability is 0.5.
    pub fn init(n_features: usize, hidden_width: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut params = he_uniform(&mut rng, n_features, hidden_width);
        params.extend(std::iter::repeat_n(0.0, 2 * hidden_width + 1));
        MlpModel {
            n_features,
            hidden_width,
            params,
        }
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (d, h) = (self.n_features, self.hidden_width);
        let (w1, rest) = self.params.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        (w1, b1, w2, rest[0])
    }

    pub fn margin_row(&self, x: &[f64]) -> f64 {
        let (w1, b1, w2, b2) = self.split();
        let d = self.n_features;
        let mut z = b2;
        for k in 0..self.hidden_width {
            let a = b1[k] + dot(&w1[k * d..(k + 1) * d], x);
            if a > 0.0 {
                z += w2[k] * a;
            }
        }
        z
    }

    /// Mean log-loss over `rows` plus `l2/2 (|W1|^2 + |w2|^2)`, and its gradient.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[bool], rows: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let (d, h) = (self.n_features, self.hidden_width);
        let (w1, b1, w2, b2) = self.split();
        let mut grad = vec![0.0; self.params.len()];
        let (gw1, rest) = grad.split_at_mut(h * d);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        let mut pre = vec![0.0; h];
        let mut loss = 0.0;
        for &i in rows {
            let xi = x.row(i);
            let yi = if y[i] { 1.0 } else { 0.0 };
            let mut z = b2;
            for k in 0..h {
                pre[k] = b1[k] + dot(&w1[k * d..(k + 1) * d], xi);
                if pre[k] > 0.0 {
                    z += w2[k] * pre[k];
                }
            }
            loss += softplus(z) - yi * z;
            let dz = sigmoid(z) - yi;
            gb2[0] += dz;
            for k in 0..h {
                if pre[k] > 0.0 {
                    gw2[k] += dz * pre[k];
                    let da = dz * w2[k];
                    gb1[k] += da;
                    for (g, xv) in gw1[k * d..(k + 1) * d].iter_mut().zip(xi) {
                        *g += da * xv;
                    }
                }
            }
        }
        let n = rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        loss /= n;
        let w1_end = h * d;
        let w2_range = w1_end + h..w1_end + 2 * h;
        let mut penalty = 0.0;
        for j in (0..w1_end).chain(w2_range) {
            penalty += self.params[j] * self.params[j];
            grad[j] += l2 * self.params[j];
        }
        (loss + 0.5 * l2 * penalty, grad)
    }

    pub fn fit(x: &Matrix, y: &[bool], params: &MlpParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if x.rows() != y.len() || x.rows() == 0 {
            return Err(Error::invalid("mlp needs matching, non-empty x and y"));
        }
        if x.has_missing() {
            return Err(Error::Model("mlp requires complete features".into()));
        }
        let mut model = MlpModel::init(x.cols(), params.hidden_width, seed);
        let mut rng = rng_from_seed(seed ^ 0xA5A5_5A5A);
        let mut opt = Adam::new(model.params.len(), params.learning_rate);
        let mut order: Vec<usize> = (0..x.rows()).collect();
        for epoch in 0..params.epochs {
            order.shuffle(&mut rng);
            for (b, batch) in order.chunks(params.batch_size).enumerate() {
                let (loss, grad) = model.loss_and_gradient(x, y, batch, params.l2_lambda);
                if !loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "mlp loss became {loss} at epoch {epoch}, batch {b}"
                    )));
                }
                opt.step(&mut model.params, &grad);
            }
        }
        Ok(model)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
