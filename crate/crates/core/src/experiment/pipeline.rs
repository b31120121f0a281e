use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{stratified_split, Panel, RowKey, Split};
use crate::error::{Error, Result};
use crate::impute::{impute_dispatch, ImputationPlan, ImputerKind, Imputed};
use crate::metrics::auc_roc;
use crate::models::{self, Classifier};
use crate::oversample::oversample;
use crate::preprocess::{percentile_transform, Standardizer};
use crate::rng::derive_seed;

use super::config::PipelineConfig;

/// Percentile-transform the full panel (peer groups use every row), then
/// split. The split seed is derived from the grid seed.
pub fn prepare_split(panel: &Panel, percentile: bool, test_fraction: f64, seed: u64) -> Result<Split> {
    let base = if percentile {
        percentile_transform(panel)
    } else {
        panel.clone()
    };
    stratified_split(&base, 1.0 - test_fraction, derive_seed(seed, "split"))
}

/// Imputed train and test panels for one imputer.
pub type ImputedPair = (Imputed, Imputed);

pub fn impute_split(split: &Split, imputer: &ImputerKind, seed: u64) -> Result<ImputedPair> {
    let plan = ImputationPlan::by_category(split.train.schema());
    impute_dispatch(&split.train, &split.test, imputer, &plan, seed)
}

/// Fitted state and scores of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub model: Classifier,
    /// Fitted on the oversampled training rows, for models that need it.
    pub standardizer: Option<Standardizer>,
    /// Training rows before oversampling, in model input space.
    pub train: Panel,
    /// Test rows in model input space.
    pub test: Panel,
    pub sampled_rows: usize,
    pub auc_train: f64,
    pub auc_test: f64,
    pub warnings: Vec<String>,
}

fn ensure_disjoint(test: &Panel, others: &[&Panel]) -> Result<()> {
    let test_keys: HashSet<RowKey> = test.keys().into_iter().collect();
    for p in others {
        if let Some(k) = p.rows().iter().map(|r| r.key()).find(|k| test_keys.contains(k)) {
            return Err(Error::invalid(format!("test row {k} reached a training stage")));
        }
    }
    Ok(())
}

/// impute -> oversample -> standardize (logistic and MLP only) -> fit -> score. `imputed` lets
/// callers reuse an imputation computed for the same imputer and seed.
pub fn run_pipeline(split: &Split, config: &PipelineConfig, imputed: Option<&ImputedPair>) -> Result<PipelineOutput> {
    config.validate()?;
    let mut warnings = Vec::new();
    let owned = match (&config.imputer, imputed) {
        (Some(kind), None) => Some(impute_split(split, kind, config.imputation_seed)?),
        _ => None,
    };
    let (train, test) = match (&config.imputer, imputed.or(owned.as_ref())) {
        (Some(_), Some(pair)) => {
            warnings.extend(pair.0.warnings.iter().cloned());
            (&pair.0.panel, &pair.1.panel)
        }
        _ => (&split.train, &split.test),
    };

    let sampled = oversample(
        train,
        &config.sampler,
        config.target_ratio,
        derive_seed(config.seed, "oversample"),
    )?;
    warnings.extend(sampled.warnings);
    ensure_disjoint(test, &[train, &sampled.panel])?;

    let standardizer = config
        .model
        .needs_standardization()
        .then(|| Standardizer::fit_panel(&sampled.panel));
    let scale = |p: &Panel| match &standardizer {
        Some(s) => s.transform_panel(p),
        None => Ok(p.clone()),
    };
    let fit_panel = scale(&sampled.panel)?;
    let model = models::fit_panel(&config.model, &fit_panel, derive_seed(config.seed, "model"))?;
    if model.converged() == Some(false) {
        warnings.push(format!("{} did not converge", config.model_label));
    }

    let train_std = scale(train)?;
    let test_std = scale(test)?;
    let auc_train = auc_roc(&model.predict_margin(&train_std.to_matrix())?, &train_std.labels()?)?;
    let auc_test = auc_roc(&model.predict_margin(&test_std.to_matrix())?, &test_std.labels()?)?;
    Ok(PipelineOutput {
        model,
        standardizer,
        train: train_std,
        test: test_std,
        sampled_rows: sampled.panel.len(),
        auc_train,
        auc_test,
        warnings,
    })
}

/// Outcome of one grid cell. Failures are recorded, not raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: PipelineConfig,
    pub auc_test: Option<f64>,
    pub auc_train: Option<f64>,
    pub seconds: f64,
    pub converged: Option<bool>,
    pub model_checksum: Option<String>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(config: &PipelineConfig, error: &Error, seconds: f64) -> Self {
        RunRecord {
            config: config.clone(),
            auc_test: None,
            auc_train: None,
            seconds,
            converged: None,
            model_checksum: None,
            warnings: Vec::new(),
            error: Some(error.to_string()),
        }
    }
}

pub(crate) fn record_from(config: &PipelineConfig, out: Result<PipelineOutput>, seconds: f64) -> RunRecord {
    match out {
        Ok(o) => RunRecord {
            config: config.clone(),
            auc_test: Some(o.auc_test),
            auc_train: Some(o.auc_train),
            seconds,
            converged: o.model.converged(),
            model_checksum: Some(o.model.checksum()),
            warnings: o.warnings,
            error: None,
        },
        Err(e) => RunRecord::failed(config, &e, seconds),
    }
}

pub fn run_config(split: &Split, config: &PipelineConfig) -> RunRecord {
    let start = Instant::now();
    let out = run_pipeline(split, config, None);
    record_from(config, out, start.elapsed().as_secs_f64())
}
