//! Missing-value imputation. Model-based imputers work block by block: each
//! block is one feature category plus the year indicator columns, which act
//! as always-observed predictors and are never imputed themselves.

mod gain;
mod knn;
mod mice;
mod simple;

use serde::{Deserialize, Serialize};

pub use gain::{discriminator_loss, generator_loss, GainBatch, GainConfig, GainModel, Net};
pub use knn::{knn_impute_block, partial_sq_distance};
pub use mice::{mice_impute_block, MiceParams};
pub use simple::{column_statistics, fill_columns, mean, median, Statistic};

use crate::data::{Category, FeatureSchema, Panel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ImputerKind {
    Mean,
    Median,
    Knn { k: usize },
    Mice(MiceParams),
    Gain(GainConfig),
}

impl ImputerKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            ImputerKind::Knn { k } if *k == 0 => Err(Error::Config("knn k must be at least 1".into())),
            ImputerKind::Mice(p) => p.validate(),
            ImputerKind::Gain(c) => c.validate(),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ImputerKind::Mean => "mean",
            ImputerKind::Median => "median",
            ImputerKind::Knn { .. } => "knn",
            ImputerKind::Mice(_) => "mice",
            ImputerKind::Gain(_) => "gain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub category: Category,
    pub features: Vec<usize>,
}

/// Partition of the schema's features into imputation blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImputationPlan {
    pub blocks: Vec<Block>,
}

impl ImputationPlan {
    /// One block per non-empty category, in category order.
    pub fn by_category(schema: &FeatureSchema) -> Self {
        let blocks = Category::ALL
            .iter()
            .map(|&c| Block {
                category: c,
                features: schema.indices_in(c),
            })
            .filter(|b| !b.features.is_empty())
            .collect();
        ImputationPlan { blocks }
    }

    /// Every feature must sit in exactly one block.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let mut seen = vec![false; n_features];
        for b in &self.blocks {
            for &j in &b.features {
                if j >= n_features || seen[j] {
                    return Err(Error::invalid(format!("feature {j} is out of range or in two blocks")));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("feature {j} belongs to no block")));
        }
        Ok(())
    }
}

/// Imputed panel plus notes such as columns that had nothing to impute from.
#[derive(Debug, Clone)]
pub struct Imputed {
    pub panel: Panel,
    pub warnings: Vec<String>,
}

fn year_indicators(panel: &Panel, years: &[i32]) -> Matrix {
    let mut m = Matrix::zeros(panel.len(), years.len());
    for (i, r) in panel.rows().iter().enumerate() {
        if let Ok(j) = years.binary_search(&r.year) {
            m.set(i, j, 1.0);
        }
    }
    m
}

fn block_matrix(features: &Matrix, block: &Block, years: &Matrix) -> Matrix {
    features.select_cols(&block.features).hstack(years)
}

fn fully_missing_warnings(panel: &Panel, cols: &[usize]) -> Vec<String> {
    cols.iter()
        .map(|&j| {
            format!(
                "feature `{}` has no observed values; filled with 0",
                panel.schema().feature(j).name
            )
        })
        .collect()
}

/// Fill every missing cell with the column mean or median of the panel itself.
pub fn impute_simple(panel: &Panel, statistic: Statistic) -> Result<Imputed> {
    let stats = column_statistics(&panel.to_matrix(), statistic);
    fill_with(panel, &stats)
}

/// Fill missing cells with externally fitted column values (`None` fills 0).
pub fn fill_with(panel: &Panel, values: &[Option<f64>]) -> Result<Imputed> {
    let mut m = panel.to_matrix();
    let flagged = fill_columns(&mut m, values);
    Ok(Imputed {
        panel: panel.with_matrix(&m)?,
        warnings: fully_missing_warnings(panel, &flagged),
    })
}

fn fully_missing_columns(m: &Matrix) -> Vec<usize> {
    (0..m.cols())
        .filter(|&j| m.rows() > 0 && (0..m.rows()).all(|i| m.get(i, j).is_nan()))
        .collect()
}

fn run_blocks(
    panel: &Panel,
    plan: &ImputationPlan,
    mut per_block: impl FnMut(usize, &Matrix, usize) -> Result<Matrix>,
) -> Result<Imputed> {
    plan.validate(panel.n_features())?;
    let features = panel.to_matrix();
    let years = year_indicators(panel, &panel.distinct_years());
    let mut out = features.clone();
    for (b, block) in plan.blocks.iter().enumerate() {
        if block.features.iter().all(|&j| (0..features.rows()).all(|i| !features.get(i, j).is_nan())) {
            continue;
        }
        let bm = block_matrix(&features, block, &years);
        let filled = per_block(b, &bm, block.features.len())?;
        for (k, &j) in block.features.iter().enumerate() {
            for i in 0..out.rows() {
                out.set(i, j, filled.get(i, k));
            }
        }
    }
    let flagged = fully_missing_columns(&features);
    for &j in &flagged {
        for i in 0..out.rows() {
            out.set(i, j, 0.0);
        }
    }
    Ok(Imputed {
        panel: panel.with_matrix(&out)?,
        warnings: fully_missing_warnings(panel, &flagged),
    })
}

pub fn impute_knn(panel: &Panel, k: usize, plan: &ImputationPlan) -> Result<Imputed> {
    if k == 0 {
        return Err(Error::Config("knn k must be at least 1".into()));
    }
    run_blocks(panel, plan, |_, bm, n_targets| Ok(knn_impute_block(bm, n_targets, k)))
}

/// Chained equations per block. Boosted trees are deterministic, so `_seed`
/// only exists for interface symmetry with the other stochastic imputers.
pub fn impute_mice(panel: &Panel, params: &MiceParams, plan: &ImputationPlan, _seed: u64) -> Result<Imputed> {
    params.validate()?;
    run_blocks(panel, plan, |_, bm, n_targets| mice_impute_block(bm, n_targets, params))
}

/// Per-block adversarial imputers plus the year set they were trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainImputer {
    pub years: Vec<i32>,
    pub blocks: Vec<(Vec<usize>, GainModel)>,
}

/// Trains one network pair per block that has missing cells. Block `b` uses
/// the seed derived from `(cfg.seed, b)`.
pub fn train_gain(panel: &Panel, plan: &ImputationPlan, cfg: &GainConfig) -> Result<GainImputer> {
    cfg.validate()?;
    plan.validate(panel.n_features())?;
    let features = panel.to_matrix();
    let years = panel.distinct_years();
    let yi = year_indicators(panel, &years);
    let mut blocks = Vec::new();
    for (b, block) in plan.blocks.iter().enumerate() {
        let bm = block_matrix(&features, block, &yi);
        if !bm.has_missing() {
            continue;
        }
        let block_cfg = GainConfig {
            seed: derive_seed(cfg.seed, &format!("gain-block-{b}")),
            ..*cfg
        };
        blocks.push((block.features.clone(), GainModel::train(&bm, &block_cfg)?));
    }
    Ok(GainImputer { years, blocks })
}

pub fn impute_gain(model: &GainImputer, panel: &Panel) -> Result<Imputed> {
    let features = panel.to_matrix();
    let yi = year_indicators(panel, &model.years);
    let mut out = features.clone();
    for (cols, gm) in &model.blocks {
        let bm = features.select_cols(cols).hstack(&yi);
        let filled = gm.impute(&bm)?;
        for (k, &j) in cols.iter().enumerate() {
            for i in 0..out.rows() {
                out.set(i, j, filled.get(i, k));
            }
        }
    }
    // columns with no block model, or fully missing ones, fall back to 0
    let flagged = fully_missing_columns(&features);
    let leftover = (0..out.cols()).any(|j| (0..out.rows()).any(|i| out.get(i, j).is_nan()));
    if leftover {
        for v in 0..out.rows() {
            for j in 0..out.cols() {
                if out.get(v, j).is_nan() {
                    out.set(v, j, 0.0);
                }
            }
        }
    }
    Ok(Imputed {
        panel: panel.with_matrix(&out)?,
        warnings: fully_missing_warnings(panel, &flagged),
    })
}

/// Impute the training panel with `kind`; the test panel always gets the
/// training-set column medians, so no test value reaches any fitted imputer.
pub fn impute_dispatch(
    train: &Panel,
    test: &Panel,
    kind: &ImputerKind,
    plan: &ImputationPlan,
    seed: u64,
) -> Result<(Imputed, Imputed)> {
    kind.validate()?;
    if train.schema() != test.schema() {
        return Err(Error::Schema("train and test panels use different schemas".into()));
    }
    let train_out = impute_train(train, kind, plan, seed)?;
    let medians = column_statistics(&train.to_matrix(), Statistic::Median);
    let test_out = fill_with(test, &medians)?;
    Ok((train_out, test_out))
}

pub fn impute_train(train: &Panel, kind: &ImputerKind, plan: &ImputationPlan, seed: u64) -> Result<Imputed> {
    match kind {
        ImputerKind::Mean => impute_simple(train, Statistic::Mean),
        ImputerKind::Median => impute_simple(train, Statistic::Median),
        ImputerKind::Knn { k } => impute_knn(train, *k, plan),
        ImputerKind::Mice(p) => impute_mice(train, p, plan, seed),
        ImputerKind::Gain(cfg) => {
            let cfg = GainConfig {
                seed: derive_seed(seed, "gain") ^ cfg.seed,
                ..*cfg
            };
            let model = train_gain(train, plan, &cfg)?;
            impute_gain(&model, train)
        }
    }
}

/// RMSE over the cells missing in `incomplete`, comparing `imputed` with
/// `truth` after dividing each column by the stddev of its true values.
pub fn masked_cell_rmse(incomplete: &Panel, imputed: &Panel, truth: &Matrix) -> f64 {
    let inc = incomplete.to_matrix();
    let imp = imputed.to_matrix();
    let mut sse = 0.0;
    let mut n = 0usize;
    for j in 0..inc.cols() {
        let col = truth.column(j);
        let mu = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..inc.rows() {
            if inc.get(i, j).is_nan() {
                let e = (imp.get(i, j) - truth.get(i, j)) / scale;
                sse += e * e;
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        (sse / n as f64).sqrt()
    }
}
