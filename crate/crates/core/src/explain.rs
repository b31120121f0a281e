//! Shapley attributions in margin (log-odds) space: exact enumeration,
//! Kernel SHAP, and the closed form for linear models. Plus global rankings
//! and CSV exports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;

use crate::data::Panel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::Classifier;
use crate::rng::{derive_seed_index, rng_from_seed};

/// Largest feature count [`shap_exact`] accepts.
pub const EXACT_MAX_FEATURES: usize = 15;
pub const DEFAULT_BACKGROUND_ROWS: usize = 100;
pub const TOP_FEATURES: usize = 15;

/// Anything that maps a feature row to a margin.
pub trait MarginModel: Sync {
    fn n_features(&self) -> usize;
    fn margin(&self, x: &[f64]) -> f64;
}

impl MarginModel for Classifier {
    fn n_features(&self) -> usize {
        Classifier::n_features(self)
    }

    fn margin(&self, x: &[f64]) -> f64 {
        self.margin_row(x)
    }
}

/// Wraps a closure as a [`MarginModel`].
pub struct FnModel<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> MarginModel for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn margin(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Reference rows defining the expectation baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    rows: Matrix,
}

impl Background {
    pub fn new(rows: Matrix) -> Result<Self> {
        if rows.rows() == 0 || rows.cols() == 0 {
            return Err(Error::invalid("background must have at least one row and column"));
        }
        if rows.has_missing() {
            return Err(Error::invalid("background rows must be complete"));
        }
        Ok(Background { rows })
    }

    /// Up to `max_rows` rows drawn without replacement, kept in source order.
    pub fn sample(m: &Matrix, max_rows: usize, seed: u64) -> Result<Self> {
        if m.rows() <= max_rows {
            return Self::new(m.clone());
        }
        let mut rng = rng_from_seed(seed);
        let mut idx = index::sample(&mut rng, m.rows(), max_rows).into_vec();
        idx.sort_unstable();
        Self::new(m.select_rows(&idx))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn means(&self) -> Vec<f64> {
        let n = self.rows.rows() as f64;
        (0..self.rows.cols())
            .map(|j| (0..self.rows.rows()).map(|i| self.rows.get(i, j)).sum::<f64>() / n)
            .collect()
    }
}

/// Attribution of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub base_value: f64,
    /// Set when the kernel system was singular and a ridge term was added.
    pub regularized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapSummary {
    /// Instances x features.
    pub attributions: Matrix,
    pub base_value: f64,
    pub feature_order: Vec<usize>,
    pub regularized: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Kernel { n_samples: usize },
    Linear,
}

fn check_shapes(model: &dyn MarginModel, instance: &[f64], bg: &Background) -> Result<usize> {
    let d = model.n_features();
    if instance.len() != d || bg.rows.cols() != d {
        return Err(Error::invalid(format!(
            "model has {d} features, instance {}, background {}",
            instance.len(),
            bg.rows.cols()
        )));
    }
    if instance.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("instance has missing values"));
    }
    Ok(d)
}

/// Interventional value of coalition `mask`: mean margin with features in
/// the mask from `instance` and the rest from each background row.
fn coalition_value(model: &dyn MarginModel, instance: &[f64], bg: &Background, mask: &[bool]) -> f64 {
    let mut buf = vec![0.0; instance.len()];
    let mut total = 0.0;
    for row in bg.rows.iter_rows() {
        for j in 0..buf.len() {
            buf[j] = if mask[j] { instance[j] } else { row[j] };
        }
        total += model.margin(&buf);
    }
    total / bg.rows.rows() as f64
}

fn bits(code: usize, d: usize) -> Vec<bool> {
    (0..d).map(|j| code >> j & 1 == 1).collect()
}

/// Shapley values by enumerating all `2^d` coalitions.
pub fn shap_exact(model: &dyn MarginModel, instance: &[f64], bg: &Background) -> Result<Attribution> {
    let d = check_shapes(model, instance, bg)?;
    if d > EXACT_MAX_FEATURES {
        return Err(Error::invalid(format!(
            "exact enumeration supports at most {EXACT_MAX_FEATURES} features, got {d}; use the kernel method"
        )));
    }
    let v: Vec<f64> = (0..1usize << d)
        .map(|code| coalition_value(model, instance, bg, &bits(code, d)))
        .collect();
    // w[s] = s! (d-s-1)! / d!
    let mut fact = vec![1.0f64; d + 1];
    for i in 1..=d {
        fact[i] = fact[i - 1] * i as f64;
    }
    let w: Vec<f64> = (0..d).map(|s| fact[s] * fact[d - s - 1] / fact[d]).collect();
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        for code in 0..1usize << d {
            if code & bit == 0 {
                *p += w[code.count_ones() as usize] * (v[code | bit] - v[code]);
            }
        }
    }
    Ok(Attribution {
        values: phi,
        base_value: v[0],
        regularized: false,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Kernel SHAP. Uses every coalition when `n_samples >= 2^d - 2`, otherwise
/// paired samples with coalition sizes drawn from the Shapley kernel.
pub fn shap_kernel(
    model: &dyn MarginModel,
    instance: &[f64],
    bg: &Background,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    let d = check_shapes(model, instance, bg)?;
    if n_samples < 2 * d + 2 {
        return Err(Error::invalid(format!("kernel SHAP needs at least {} samples, got {n_samples}", 2 * d + 2)));
    }
    let base = coalition_value(model, instance, bg, &vec![false; d]);
    let full = coalition_value(model, instance, bg, &vec![true; d]);
    let delta = full - base;
    if d == 1 {
        return Ok(Attribution {
            values: vec![delta],
            base_value: base,
            regularized: false,
        });
    }

    let enumerate = d < usize::BITS as usize - 1 && (1usize << d) - 2 <= n_samples;
    let mut coalitions: Vec<(Vec<bool>, f64)> = Vec::new();
    if enumerate {
        for code in 1..(1usize << d) - 1 {
            let mask = bits(code, d);
            let s = code.count_ones() as usize;
            let w = (d - 1) as f64 / (binomial(d, s) * s as f64 * (d - s) as f64);
            coalitions.push((mask, w));
        }
    } else {
        let mut rng = rng_from_seed(seed);
        let size_w: Vec<f64> = (1..d).map(|s| 1.0 / (s as f64 * (d - s) as f64)).collect();
        let total: f64 = size_w.iter().sum();
        while coalitions.len() < n_samples {
            let mut u = rng.random::<f64>() * total;
            let mut s = d - 1;
            for (i, w) in size_w.iter().enumerate() {
                if u < *w {
                    s = i + 1;
                    break;
                }
                u -= w;
            }
            let mut mask = vec![false; d];
            for j in index::sample(&mut rng, d, s) {
                mask[j] = true;
            }
            let comp: Vec<bool> = mask.iter().map(|b| !b).collect();
            coalitions.push((mask, 1.0));
            coalitions.push((comp, 1.0));
        }
    }

    // eliminate the last feature through the efficiency constraint
    let p = d - 1;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut z = vec![0.0; p];
    for (mask, w) in &coalitions {
        let y = coalition_value(model, instance, bg, mask) - base;
        let zl = if mask[p] { 1.0 } else { 0.0 };
        for j in 0..p {
            z[j] = (if mask[j] { 1.0 } else { 0.0 }) - zl;
        }
        let t = y - zl * delta;
        for r in 0..p {
            if z[r] == 0.0 {
                continue;
            }
            b[r] += w * z[r] * t;
            for c in 0..p {
                a[(r, c)] += w * z[r] * z[c];
            }
        }
    }
    let (sol, regularized) = match a.clone().cholesky() {
        Some(ch) => (ch.solve(&b), false),
        None => {
            let ridge = 1e-8 * (a.trace() / p as f64).max(1e-12);
            let reg = &a + DMatrix::<f64>::identity(p, p) * ridge;
            let sol = reg
                .cholesky()
                .map(|ch| ch.solve(&b))
                .ok_or_else(|| Error::Numerical("kernel SHAP system is singular even with ridge".into()))?;
            (sol, true)
        }
    };
    let mut values: Vec<f64> = sol.iter().copied().collect();
    values.push(delta - values.iter().sum::<f64>());
    Ok(Attribution {
        values,
        base_value: base,
        regularized,
    })
}

/// Closed form for a logistic model assuming feature independence:
/// `phi_ij = w_j (x_ij - mu_j)` and base `w . mu + b`.
pub fn shap_linear(model: &Classifier, x: &Matrix, bg: &Background) -> Result<ShapSummary> {
    let (w, b) = model
        .coefficients()
        .ok_or_else(|| Error::Model(format!("linear SHAP needs a logistic model, got {}", model.name())))?;
    if x.cols() != w.len() || bg.rows.cols() != w.len() {
        return Err(Error::invalid("feature count does not match the model"));
    }
    if x.has_missing() {
        return Err(Error::invalid("instances have missing values"));
    }
    let mu = bg.means();
    let base = w.iter().zip(&mu).map(|(a, m)| a * m).sum::<f64>() + b;
    let mut att = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            att.set(i, j, w[j] * (x.get(i, j) - mu[j]));
        }
    }
    Ok(summarize(att, base, 0))
}

/// Explains every row of `x`. Instance `i` of the kernel method uses the
/// seed derived from `(seed, i)`, so results do not depend on thread count.
pub fn explain(model: &Classifier, x: &Matrix, bg: &Background, method: Method, seed: u64) -> Result<ShapSummary> {
    if x.rows() == 0 {
        return Err(Error::invalid("nothing to explain"));
    }
    if method == Method::Linear {
        return shap_linear(model, x, bg);
    }
    let per: Vec<Attribution> = (0..x.rows())
        .into_par_iter()
        .map(|i| match method {
            Method::Exact => shap_exact(model, x.row(i), bg),
            Method::Kernel { n_samples } => shap_kernel(model, x.row(i), bg, n_samples, derive_seed_index(seed, i as u64)),
            Method::Linear => unreachable!(),
        })
        .collect::<Result<_>>()?;
    let base = per[0].base_value;
    let regularized = per.iter().filter(|a| a.regularized).count();
    let mut att = Matrix::zeros(x.rows(), x.cols());
    for (i, a) in per.iter().enumerate() {
        att.row_mut(i).copy_from_slice(&a.values);
    }
    Ok(summarize(att, base, regularized))
}

fn summarize(attributions: Matrix, base_value: f64, regularized: usize) -> ShapSummary {
    let order = rank_by_mean_abs(&attributions).into_iter().map(|(j, _)| j).collect();
    ShapSummary {
        attributions,
        base_value,
        feature_order: order,
        regularized,
    }
}

fn rank_by_mean_abs(att: &Matrix) -> Vec<(usize, f64)> {
    let n = att.rows().max(1) as f64;
    let mut ranked: Vec<(usize, f64)> = (0..att.cols())
        .map(|j| (j, (0..att.rows()).map(|i| att.get(i, j).abs()).sum::<f64>() / n))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Features by mean absolute attribution, descending; ties by index.
pub fn rank_features(summary: &ShapSummary) -> Vec<(usize, f64)> {
    rank_by_mean_abs(&summary.attributions)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `feature,mean_abs_shap`, sorted descending.
pub fn write_bar_csv(summary: &ShapSummary, panel: &Panel, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "feature,mean_abs_shap").map_err(io)?;
    for (j, v) in rank_features(summary) {
        writeln!(w, "{},{}", panel.schema().feature(j).name, v).map_err(io)?;
    }
    finish(w, path)
}

/// `feature,instance_id,shap_value,feature_value` for the top features.
/// `x` holds the explained feature values, row-aligned with `panel`.
pub fn write_beeswarm_csv(summary: &ShapSummary, panel: &Panel, x: &Matrix, top: usize, path: &Path) -> Result<()> {
    if x.rows() != panel.len() || summary.attributions.rows() != panel.len() {
        return Err(Error::invalid("summary, panel and values must have the same rows"));
    }
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "feature,instance_id,shap_value,feature_value").map_err(io)?;
    for &j in summary.feature_order.iter().take(top) {
        let name = &panel.schema().feature(j).name;
        for (i, row) in panel.rows().iter().enumerate() {
            writeln!(w, "{name},{},{},{}", row.key(), summary.attributions.get(i, j), x.get(i, j)).map_err(io)?;
        }
    }
    finish(w, path)
}

/// `feature,scaled_coefficient` in schema order.
pub fn write_coefficients_csv(model: &Classifier, panel: &Panel, path: &Path) -> Result<()> {
    let (coef, _) = model
        .coefficients()
        .ok_or_else(|| Error::Model(format!("{} has no coefficients", model.name())))?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "feature,scaled_coefficient").map_err(io)?;
    for (spec, c) in panel.schema().features().iter().zip(coef) {
        writeln!(w, "{},{}", spec.name, c).map_err(io)?;
    }
    finish(w, path)
}

/// Output locations for [`export_explanations`].
#[derive(Debug, Clone)]
pub struct ExportPaths<'a> {
    pub bar: &'a Path,
    pub beeswarm: &'a Path,
    /// Written only for models with coefficients.
    pub coefficients: Option<&'a Path>,
}

pub fn export_explanations(
    summary: &ShapSummary,
    panel: &Panel,
    x: &Matrix,
    model: &Classifier,
    paths: &ExportPaths<'_>,
) -> Result<()> {
    write_bar_csv(summary, panel, paths.bar)?;
    write_beeswarm_csv(summary, panel, x, TOP_FEATURES, paths.beeswarm)?;
    if let (Some(p), Some(_)) = (paths.coefficients, model.coefficients()) {
        write_coefficients_csv(model, panel, p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bg(rows: &[&[f64]]) -> Background {
        Background::new(Matrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn additive_model() {
        let m = FnModel { n_features: 2, f: |x: &[f64]| x[0] + 2.0 * x[1] };
        let a = shap_exact(&m, &[1.0, 1.0], &bg(&[&[0.0, 0.0]])).unwrap();
        assert_eq!(a.values, vec![1.0, 2.0]);
    }

    #[test]
    fn product_splits_evenly() {
        let m = FnModel { n_features: 2, f: |x: &[f64]| x[0] * x[1] };
        let a = shap_exact(&m, &[1.0, 1.0], &bg(&[&[0.0, 0.0]])).unwrap();
        assert_eq!(a.values, vec![0.5, 0.5]);
        assert_eq!(a.base_value, 0.0);
    }

    #[test]
    fn instance_equal_to_background_is_zero() {
        let m = FnModel { n_features: 3, f: |x: &[f64]| x[0] * x[1] - x[2].exp() };
        let a = shap_exact(&m, &[0.3, -1.0, 2.0], &bg(&[&[0.3, -1.0, 2.0]])).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_rejects_wide_models() {
        let m = FnModel { n_features: 16, f: |_: &[f64]| 0.0 };
        let row = vec![0.0; 16];
        assert!(shap_exact(&m, &row, &bg(&[&row])).is_err());
    }

    #[test]
    fn kernel_enumeration_matches_exact() {
        let m = FnModel {
            n_features: 4,
            f: |x: &[f64]| x[0] * x[1] + (x[2] - x[3]).tanh() + 0.5 * x[3],
        };
        let b = bg(&[&[0.0, 1.0, 0.5, -0.2], &[1.0, -1.0, 0.0, 0.3]]);
        let x = [0.7, 0.2, -0.4, 1.1];
        let e = shap_exact(&m, &x, &b).unwrap();
        let k = shap_kernel(&m, &x, &b, 14, 0).unwrap();
        for (a, c) in e.values.iter().zip(&k.values) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_kernel_keeps_local_accuracy() {
        let d = 20;
        let m = FnModel {
            n_features: d,
            f: |x: &[f64]| x.iter().enumerate().map(|(j, v)| (j as f64 * 0.1) * v * v).sum(),
        };
        let b = bg(&[&vec![0.0; d]]);
        let x: Vec<f64> = (0..d).map(|j| j as f64 / d as f64).collect();
        let a = shap_kernel(&m, &x, &b, 200, 5).unwrap();
        let total = a.base_value + a.values.iter().sum::<f64>();
        assert!((total - m.margin(&x)).abs() < 1e-9);
    }

    #[test]
    fn ranking_ties_by_index() {
        let s = summarize(Matrix::zeros(3, 3), 0.0, 0);
        assert_eq!(s.feature_order, vec![0, 1, 2]);
        let att = Matrix::from_rows(&[[0.3, -0.1, 0.7], [-0.3, 0.1, -0.7]]);
        let s = summarize(att, 0.0, 0);
        assert_eq!(s.feature_order, vec![2, 0, 1]);
    }
}
