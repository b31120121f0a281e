//! Adversarial imputation: a generator proposes values for the missing cells
//! and a discriminator, given a partial hint of the mask, guesses which cells
//! were observed.
//!
//! Both networks map `2d` inputs through one `tanh` hidden layer to `d`
//! sigmoid outputs. Data are min-max scaled to `[0, 1]` per column.
//!
//! Losses on a minibatch of `B` rows (mask `m`, hint indicator `b`, hint
//! `h = b*m + 0.5(1-b)`):
//!
//! ```text
//! L_D = -1/|U| sum_{b=0} [ m log D + (1-m) log(1-D) ]
//! L_G = -1/(B d) sum (1-m) log D  +  alpha * sum m (x - G)^2 / sum m
//! ```

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{glorot, sigmoid, Adam};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainConfig {
    /// Hidden units per network; `None` uses the block width.
    pub hidden_width: Option<usize>,
    pub hint_rate: f64,
    /// Weight of the reconstruction term in the generator loss.
    pub alpha: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig {
            hidden_width: None,
            hint_rate: 0.9,
            alpha: 100.0,
            batch_size: 128,
            steps: 3000,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl GainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == Some(0) || self.batch_size == 0 || self.steps == 0 {
            return Err(Error::Config("gain hidden_width, batch_size and steps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.hint_rate) || !(self.alpha >= 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("gain hint_rate must be in [0,1], alpha >= 0, lr > 0".into()));
        }
        Ok(())
    }
}

/// `2d -> h (tanh) -> d (sigmoid)`, flat parameters `[W1 (h x 2d), b1, W2 (d x h), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub d: usize,
    pub h: usize,
    pub params: Vec<f64>,
}

struct Forward {
    hidden: Vec<f64>,
    out: Vec<f64>,
}

impl Net {
    pub fn init(d: usize, h: usize, rng: &mut Rng) -> Self {
        let mut params = glorot(rng, 2 * d, h);
        params.extend(std::iter::repeat_n(0.0, h));
        params.extend(glorot(rng, h, d));
        params.extend(std::iter::repeat_n(0.0, d));
        Net { d, h, params }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.h * 2 * self.d;
        (w1, w1 + self.h, w1 + self.h + self.d * self.h)
    }

    fn forward(&self, a: &[f64], b: &[f64]) -> Forward {
        let (d, h) = (self.d, self.h);
        let (o_b1, o_w2, o_b2) = self.offsets();
        let p = &self.params;
        let hidden: Vec<f64> = (0..h)
            .map(|k| {
                let row = &p[k * 2 * d..(k + 1) * 2 * d];
                let mut s = p[o_b1 + k];
                for i in 0..d {
                    s += row[i] * a[i] + row[d + i] * b[i];
                }
                s.tanh()
            })
            .collect();
        let out = (0..d)
            .map(|j| {
                let row = &p[o_w2 + j * h..o_w2 + (j + 1) * h];
                sigmoid(p[o_b2 + j] + row.iter().zip(&hidden).map(|(w, t)| w * t).sum::<f64>())
            })
            .collect();
        Forward { hidden, out }
    }

    /// Accumulate parameter gradients given `d loss / d logit` at the output,
    /// and return `d loss / d a` (the first input half).
    fn backward(&self, a: &[f64], b: &[f64], fw: &Forward, dlogit: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (d, h) = (self.d, self.h);
        let (o_b1, o_w2, o_b2) = self.offsets();
        let p = &self.params;
        let mut dhidden = vec![0.0; h];
        for j in 0..d {
            let g = dlogit[j];
            if g == 0.0 {
                continue;
            }
            grad[o_b2 + j] += g;
            for k in 0..h {
                grad[o_w2 + j * h + k] += g * fw.hidden[k];
                dhidden[k] += g * p[o_w2 + j * h + k];
            }
        }
        let mut da = vec![0.0; d];
        for k in 0..h {
            let dpre = dhidden[k] * (1.0 - fw.hidden[k] * fw.hidden[k]);
            if dpre == 0.0 {
                continue;
            }
            grad[o_b1 + k] += dpre;
            let base = k * 2 * d;
            for i in 0..d {
                grad[base + i] += dpre * a[i];
                grad[base + d + i] += dpre * b[i];
                da[i] += dpre * p[base + i];
            }
        }
        da
    }
}

/// One minibatch with every random draw fixed, so losses are deterministic
/// functions of the network parameters.
#[derive(Debug, Clone)]
pub struct GainBatch {
    /// Scaled data, 0 where missing.
    pub x: Vec<Vec<f64>>,
    pub mask: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
    /// 1 where the hint reveals the mask entry.
    pub reveal: Vec<Vec<f64>>,
}

impl GainBatch {
    pub fn draw(x: &[Vec<f64>], mask: &[Vec<f64>], hint_rate: f64, rng: &mut Rng) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let noise = x
            .iter()
            .map(|_| (0..d).map(|_| rng.random_range(0.0..0.01)).collect())
            .collect();
        let reveal = x
            .iter()
            .map(|_| {
                (0..d)
                    .map(|_| if rng.random_bool(hint_rate) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        GainBatch {
            x: x.to_vec(),
            mask: mask.to_vec(),
            noise,
            reveal,
        }
    }

    pub fn hint(&self, i: usize) -> Vec<f64> {
        self.mask[i]
            .iter()
            .zip(&self.reveal[i])
            .map(|(m, b)| b * m + 0.5 * (1.0 - b))
            .collect()
    }

    fn noisy_input(&self, i: usize) -> Vec<f64> {
        (0..self.x[i].len())
            .map(|j| self.mask[i][j] * self.x[i][j] + (1.0 - self.mask[i][j]) * self.noise[i][j])
            .collect()
    }
}

fn ln_clamped(p: f64) -> f64 {
    p.max(1e-12).ln()
}

fn combine(x: &[f64], m: &[f64], g: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|j| m[j] * x[j] + (1.0 - m[j]) * g[j]).collect()
}

/// Discriminator loss and its gradient with respect to the discriminator.
pub fn discriminator_loss(gen: &Net, disc: &Net, batch: &GainBatch) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; disc.params.len()];
    let unrevealed: f64 = batch.reveal.iter().flatten().filter(|&&b| b == 0.0).count() as f64;
    if unrevealed == 0.0 {
        return (0.0, grad);
    }
    let mut loss = 0.0;
    for i in 0..batch.x.len() {
        let g = gen.forward(&batch.noisy_input(i), &batch.mask[i]).out;
        let xhat = combine(&batch.x[i], &batch.mask[i], &g);
        let hint = batch.hint(i);
        let fw = disc.forward(&xhat, &hint);
        let mut dlogit = vec![0.0; disc.d];
        for j in 0..disc.d {
            if batch.reveal[i][j] != 0.0 {
                continue;
            }
            let m = batch.mask[i][j];
            let p = fw.out[j];
            loss -= m * ln_clamped(p) + (1.0 - m) * ln_clamped(1.0 - p);
            dlogit[j] = (p - m) / unrevealed;
        }
        disc.backward(&xhat, &hint, &fw, &dlogit, &mut grad);
    }
    (loss / unrevealed, grad)
}

/// Generator loss and its gradient with respect to the generator.
pub fn generator_loss(gen: &Net, disc: &Net, batch: &GainBatch, alpha: f64) -> (f64, Vec<f64>) {
    let d = gen.d;
    let n_entries = (batch.x.len() * d) as f64;
    let observed: f64 = batch.mask.iter().flatten().sum::<f64>().max(1.0);
    let mut grad = vec![0.0; gen.params.len()];
    let mut grad_disc_scratch = vec![0.0; disc.params.len()];
    let mut loss = 0.0;
    for i in 0..batch.x.len() {
        let m = &batch.mask[i];
        let noisy = batch.noisy_input(i);
        let gfw = gen.forward(&noisy, m);
        let xhat = combine(&batch.x[i], m, &gfw.out);
        let hint = batch.hint(i);
        let dfw = disc.forward(&xhat, &hint);
        let mut dlogit_d = vec![0.0; d];
        for j in 0..d {
            let p = dfw.out[j];
            loss -= (1.0 - m[j]) * ln_clamped(p) / n_entries;
            // d/dz of -(1-m) ln sigmoid(z)
            dlogit_d[j] = -(1.0 - m[j]) * (1.0 - p) / n_entries;
        }
        let dxhat = disc.backward(&xhat, &hint, &dfw, &dlogit_d, &mut grad_disc_scratch);
        let mut dlogit_g = vec![0.0; d];
        for j in 0..d {
            let gj = gfw.out[j];
            let resid = batch.x[i][j] - gj;
            loss += alpha * m[j] * resid * resid / observed;
            let dg = (1.0 - m[j]) * dxhat[j] - 2.0 * alpha * m[j] * resid / observed;
            dlogit_g[j] = dg * gj * (1.0 - gj);
        }
        gen.backward(&noisy, m, &gfw, &dlogit_g, &mut grad);
    }
    (loss, grad)
}

/// Trained imputer for one column block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainModel {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub generator: Net,
    pub discriminator: Net,
    pub seed: u64,
}

fn scale_rows(m: &Matrix, min: &[f64], max: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut xs = Vec::with_capacity(m.rows());
    let mut ms = Vec::with_capacity(m.rows());
    for r in m.iter_rows() {
        let mut x = Vec::with_capacity(r.len());
        let mut k = Vec::with_capacity(r.len());
        for (j, &v) in r.iter().enumerate() {
            if v.is_nan() {
                x.push(0.0);
                k.push(0.0);
            } else {
                let range = max[j] - min[j];
                x.push(if range > 0.0 { (v - min[j]) / range } else { 0.0 });
                k.push(1.0);
            }
        }
        xs.push(x);
        ms.push(k);
    }
    (xs, ms)
}

impl GainModel {
    /// Train on a block matrix (`NaN` = missing).
    pub fn train(m: &Matrix, cfg: &GainConfig) -> Result<Self> {
        cfg.validate()?;
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::invalid("gain needs a non-empty block"));
        }
        let d = m.cols();
        let mut min = vec![0.0; d];
        let mut max = vec![0.0; d];
        for j in 0..d {
            let obs = (0..m.rows()).map(|i| m.get(i, j)).filter(|v| !v.is_nan());
            let (lo, hi) = obs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo.is_finite() {
                min[j] = lo;
                max[j] = hi;
            }
        }
        let (xs, ms) = scale_rows(m, &min, &max);
        let h = cfg.hidden_width.unwrap_or(d);
        let mut rng = rng_from_seed(cfg.seed);
        let mut generator = Net::init(d, h, &mut rng);
        let mut discriminator = Net::init(d, h, &mut rng);
        let mut opt_g = Adam::new(generator.params.len(), cfg.learning_rate);
        let mut opt_d = Adam::new(discriminator.params.len(), cfg.learning_rate);
        let bs = cfg.batch_size.min(m.rows());
        for step in 0..cfg.steps {
            let idx = sample(&mut rng, m.rows(), bs).into_vec();
            let bx: Vec<Vec<f64>> = idx.iter().map(|&i| xs[i].clone()).collect();
            let bm: Vec<Vec<f64>> = idx.iter().map(|&i| ms[i].clone()).collect();
            let batch = GainBatch::draw(&bx, &bm, cfg.hint_rate, &mut rng);
            let (ld, gd) = discriminator_loss(&generator, &discriminator, &batch);
            opt_d.step(&mut discriminator.params, &gd);
            let (lg, gg) = generator_loss(&generator, &discriminator, &batch, cfg.alpha);
            if !ld.is_finite() || !lg.is_finite() {
                return Err(Error::Numerical(format!(
                    "gain loss diverged at step {step}: discriminator {ld}, generator {lg}"
                )));
            }
            opt_g.step(&mut generator.params, &gg);
        }
        Ok(GainModel {
            min,
            max,
            generator,
            discriminator,
            seed: cfg.seed,
        })
    }

    /// Observed cells are copied through untouched; missing cells take the
    /// generator output, rescaled to the original units.
    pub fn impute(&self, m: &Matrix) -> Result<Matrix> {
        let d = self.generator.d;
        if m.cols() != d {
            return Err(Error::invalid(format!("gain model has {d} columns, got {}", m.cols())));
        }
        let (xs, ms) = scale_rows(m, &self.min, &self.max);
        let mut rng = rng_from_seed(self.seed ^ 0x6A09_E667_F3BC_C909);
        let mut out = m.clone();
        for i in 0..m.rows() {
            if ms[i].iter().all(|&v| v == 1.0) {
                continue;
            }
            let noisy: Vec<f64> = (0..d)
                .map(|j| {
                    let z: f64 = rng.random_range(0.0..0.01);
                    ms[i][j] * xs[i][j] + (1.0 - ms[i][j]) * z
                })
                .collect();
            let g = self.generator.forward(&noisy, &ms[i]).out;
            for j in 0..d {
                if ms[i][j] == 0.0 {
                    out.set(i, j, self.min[j] + g[j] * (self.max[j] - self.min[j]));
                }
            }
        }
        Ok(out)
    }
}
