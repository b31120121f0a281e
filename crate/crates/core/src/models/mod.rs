//! Classifier families behind one fit/predict contract. Every model scores in
//! margin (log-odds) space; probabilities are the logistic of the margin.

mod forest;
mod gbdt;
mod logistic;
mod mlp;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use forest::{gini, ForestParams, RandomForest};
pub use gbdt::{leaf_weight, split_gain, GbdtModel, GbdtParams, Objective};
pub use logistic::{gradient as logistic_gradient, objective as logistic_objective};
pub use logistic::{LogisticModel, LogisticParams};
pub use mlp::{MlpModel, MlpParams};
pub use tree::{Node, Tree};

use crate::data::Panel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::sigmoid;

/// Probabilities from forests are clamped to this distance from 0 and 1 so
/// that every model has a finite margin.
pub const PROBA_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic(LogisticParams),
    RandomForest(ForestParams),
    Gbdt(GbdtParams),
    Mlp(MlpParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Logistic(_) => "logistic",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::Gbdt(_) => "gbdt",
            ModelSpec::Mlp(_) => "mlp",
        }
    }

    /// Models trained on z-scored inputs.
    pub fn needs_standardization(&self) -> bool {
        matches!(self, ModelSpec::Logistic(_) | ModelSpec::Mlp(_))
    }

    pub fn accepts_missing(&self) -> bool {
        matches!(self, ModelSpec::Gbdt(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Logistic(p) => {
                if !(p.l2_lambda >= 0.0) || p.max_iter == 0 || !(p.tol > 0.0) {
                    return Err(Error::Config("invalid logistic hyperparameters".into()));
                }
                Ok(())
            }
            ModelSpec::RandomForest(p) => p.validate(),
            ModelSpec::Gbdt(p) => p.validate(),
            ModelSpec::Mlp(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Logistic(LogisticModel),
    RandomForest(RandomForest),
    Gbdt(GbdtModel),
    Mlp(MlpModel),
}

/// Fit any model family. `seed` drives every random choice the family makes.
pub fn fit(spec: &ModelSpec, x: &Matrix, y: &[bool], seed: u64) -> Result<Classifier> {
    spec.validate()?;
    if x.has_missing() && !spec.accepts_missing() {
        return Err(Error::Model(format!("{} cannot train on missing values", spec.name())));
    }
    Ok(match spec {
        ModelSpec::Logistic(p) => Classifier::Logistic(LogisticModel::fit(x, y, p)?),
        ModelSpec::RandomForest(p) => Classifier::RandomForest(RandomForest::fit(x, y, p, seed)?),
        ModelSpec::Gbdt(p) => Classifier::Gbdt(GbdtModel::fit_classifier(x, y, p)?),
        ModelSpec::Mlp(p) => Classifier::Mlp(MlpModel::fit(x, y, p, seed)?),
    })
}

/// Fit on a labeled panel's feature matrix.
pub fn fit_panel(spec: &ModelSpec, panel: &Panel, seed: u64) -> Result<Classifier> {
    fit(spec, &panel.to_matrix(), &panel.labels()?, seed)
}

pub fn train_logistic(train: &Panel, params: LogisticParams) -> Result<Classifier> {
    fit_panel(&ModelSpec::Logistic(params), train, 0)
}

pub fn train_random_forest(train: &Panel, params: ForestParams, seed: u64) -> Result<Classifier> {
    fit_panel(&ModelSpec::RandomForest(params), train, seed)
}

pub fn train_gbdt(train: &Panel, params: GbdtParams, seed: u64) -> Result<Classifier> {
    fit_panel(&ModelSpec::Gbdt(params), train, seed)
}

pub fn train_mlp(train: &Panel, params: MlpParams, seed: u64) -> Result<Classifier> {
    fit_panel(&ModelSpec::Mlp(params), train, seed)
}

const ARTIFACT_FORMAT: &str = "activist-classifier";
const ARTIFACT_VERSION: u32 = 1;

/// On-disk model file: JSON `{"format", "version", "model"}` where `model`
/// is the tagged classifier (`"kind": "logistic" | "random_forest" | "gbdt" | "mlp"`).
#[derive(Serialize, Deserialize)]
struct Artifact<T> {
    format: String,
    version: u32,
    model: T,
}

pub(crate) fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let art = Artifact {
        format: ARTIFACT_FORMAT.into(),
        version: ARTIFACT_VERSION,
        model: value,
    };
    let s = serde_json::to_string(&art)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub(crate) fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let art: Artifact<T> = serde_json::from_str(&s)?;
    if art.format != ARTIFACT_FORMAT {
        return Err(Error::invalid(format!("unexpected artifact format `{}`", art.format)));
    }
    if art.version != ARTIFACT_VERSION {
        return Err(Error::invalid(format!(
            "artifact version {} unsupported (expected {ARTIFACT_VERSION})",
            art.version
        )));
    }
    Ok(art.model)
}

impl Classifier {
    pub fn name(&self) -> &'static str {
        match self {
            Classifier::Logistic(_) => "logistic",
            Classifier::RandomForest(_) => "random_forest",
            Classifier::Gbdt(_) => "gbdt",
            Classifier::Mlp(_) => "mlp",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Classifier::Logistic(m) => m.weights.len(),
            Classifier::RandomForest(m) => m.n_features,
            Classifier::Gbdt(m) => m.n_features,
            Classifier::Mlp(m) => m.n_features,
        }
    }

    pub fn accepts_missing(&self) -> bool {
        matches!(self, Classifier::Gbdt(_))
    }

    /// Log-odds score for one row. Forests report the logit of their clamped
    /// vote fraction.
    pub fn margin_row(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Logistic(m) => m.margin_row(x),
            Classifier::RandomForest(m) => {
                let p = m.proba_row(x).clamp(PROBA_CLAMP, 1.0 - PROBA_CLAMP);
                (p / (1.0 - p)).ln()
            }
            Classifier::Gbdt(m) => m.margin_row(x),
            Classifier::Mlp(m) => m.margin_row(x),
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features() {
            return Err(Error::invalid(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.cols()
            )));
        }
        if !self.accepts_missing() && x.has_missing() {
            return Err(Error::Model(format!(
                "{} cannot score rows with missing values",
                self.name()
            )));
        }
        Ok(())
    }

    pub fn predict_margin(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(x.iter_rows().map(|r| self.margin_row(r)).collect())
    }

    /// One probability per row, in row order.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(x
            .iter_rows()
            .map(|r| match self {
                Classifier::RandomForest(m) => m.proba_row(r).clamp(PROBA_CLAMP, 1.0 - PROBA_CLAMP),
                _ => sigmoid(self.margin_row(r)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0),
            })
            .collect())
    }

    /// Logistic coefficients; `None` for other families.
    pub fn coefficients(&self) -> Option<(&[f64], f64)> {
        match self {
            Classifier::Logistic(m) => Some((&m.weights, m.intercept)),
            _ => None,
        }
    }

    pub fn converged(&self) -> Option<bool> {
        match self {
            Classifier::Logistic(m) => Some(m.converged),
            _ => None,
        }
    }

    /// SHA-256 of the serialized parameters.
    pub fn checksum(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("classifier serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_json(path.as_ref())
    }
}

/// Score a panel. Non-boosting models reject missing cells.
pub fn predict_proba(model: &Classifier, panel: &Panel) -> Result<Vec<f64>> {
    model.predict_proba(&panel.to_matrix())
}
