//! Chained-equation imputation with boosted regression trees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impute::simple::median;
use crate::matrix::Matrix;
use crate::models::{GbdtModel, GbdtParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiceParams {
    pub iterations: usize,
    pub trees: GbdtParams,
}

impl Default for MiceParams {
    fn default() -> Self {
        MiceParams {
            iterations: 4,
            trees: GbdtParams {
                n_trees: 50,
                max_depth: 3,
                learning_rate: 0.1,
                min_leaf: 5,
                lambda: 1.0,
            },
        }
    }
}

impl MiceParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("mice iterations must be at least 1".into()));
        }
        self.trees.validate()
    }
}

/// Impute the first `n_targets` columns of `m`; the rest are complete
/// auxiliary predictors. Missing cells start at the column median, then each
/// round visits the incomplete columns in ascending missing-count order,
/// regressing each on every other column and overwriting its originally
/// missing cells with the predictions.
pub fn mice_impute_block(m: &Matrix, n_targets: usize, params: &MiceParams) -> Result<Matrix> {
    params.validate()?;
    if m.cols() < 2 {
        return Err(Error::invalid("chained equations need at least two block columns"));
    }
    let n = m.rows();
    let mut filled = m.clone();
    let mut order: Vec<(usize, usize)> = Vec::new();
    for j in 0..n_targets {
        let missing: Vec<usize> = (0..n).filter(|&i| m.get(i, j).is_nan()).collect();
        let fill = median((0..n).map(|i| m.get(i, j))).unwrap_or(0.0);
        for &i in &missing {
            filled.set(i, j, fill);
        }
        if !missing.is_empty() && missing.len() < n {
            order.push((missing.len(), j));
        }
    }
    order.sort_unstable();

    for _ in 0..params.iterations {
        for &(_, j) in &order {
            let predictors: Vec<usize> = (0..m.cols()).filter(|&c| c != j).collect();
            let (obs, miss): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| !m.get(i, j).is_nan());
            let x_obs = filled.select_rows(&obs).select_cols(&predictors);
            let y_obs: Vec<f64> = obs.iter().map(|&i| m.get(i, j)).collect();
            let model = GbdtModel::fit_regressor(&x_obs, &y_obs, &params.trees)?;
            let x_miss = filled.select_rows(&miss).select_cols(&predictors);
            for (&i, pred) in miss.iter().zip(model.predict_margin(&x_miss)) {
                filled.set(i, j, pred);
            }
        }
    }
    Ok(filled.select_cols(&(0..n_targets).collect::<Vec<_>>()))
}
