use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impute::{GainConfig, ImputerKind, MiceParams};
use crate::models::{ForestParams, GbdtParams, LogisticParams, MlpParams, ModelSpec};
use crate::oversample::{SamplerKind, DEFAULT_K, DEFAULT_M};
use crate::rng::{derive_seed, derive_seed_index};

/// Imputation axis value meaning "leave missing cells in place".
pub const NO_IMPUTATION: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSection {
    pub k: usize,
}

impl Default for KnnSection {
    fn default() -> Self {
        KnnSection { k: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OversampleSection {
    pub k: usize,
    pub m: usize,
    pub beta: f64,
    pub target_ratio: f64,
}

impl Default for OversampleSection {
    fn default() -> Self {
        OversampleSection {
            k: DEFAULT_K,
            m: DEFAULT_M,
            beta: 1.0,
            target_ratio: 1.0,
        }
    }
}

/// Everything a grid run reads from its config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub seed: u64,
    /// Labeled panel CSV; relative paths resolve against the config file.
    pub panel: Option<PathBuf>,
    pub test_fraction: f64,
    pub threshold: f64,
    /// Apply the industry-year percentile transform before splitting.
    pub percentile: bool,
    pub jobs: usize,
    /// Fill the `seconds` report column (makes reports run-dependent).
    pub timings: bool,
    pub imputers: Vec<String>,
    pub samplers: Vec<String>,
    pub models: Vec<String>,
    /// Model labels additionally run on unimputed data.
    pub sparse_native: Vec<String>,
    pub sparse_native_samplers: Vec<String>,
    pub knn: KnnSection,
    pub mice: MiceParams,
    pub gain: GainConfig,
    pub oversample: OversampleSection,
    pub logistic: LogisticParams,
    pub random_forest: ForestParams,
    pub gbdt: GbdtParams,
    pub mlp: MlpParams,
}

impl Default for GridConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        GridConfig {
            seed: 0,
            panel: None,
            test_fraction: 0.2,
            threshold: 0.7,
            percentile: true,
            jobs: 1,
            timings: false,
            imputers: s(&["median", "knn", "mice", "gain"]),
            samplers: s(&["none", "random", "smote", "borderline_smote", "adasyn"]),
            models: s(&["logistic", "random_forest", "xgboost", "lightgbm", "catboost", "mlp"]),
            sparse_native: s(&["xgboost", "lightgbm", "catboost"]),
            sparse_native_samplers: s(&["none"]),
            knn: KnnSection::default(),
            mice: MiceParams::default(),
            gain: GainConfig::default(),
            oversample: OversampleSection::default(),
            logistic: LogisticParams::default(),
            random_forest: ForestParams::default(),
            gbdt: GbdtParams::default(),
            mlp: MlpParams::default(),
        }
    }
}

/// One cell of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Position in the expanded grid.
    pub index: usize,
    /// `None` keeps missing cells (sparse-native boosting).
    pub imputer: Option<ImputerKind>,
    pub sampler: SamplerKind,
    pub target_ratio: f64,
    /// Reported model name; several labels may share one model family.
    pub model_label: String,
    pub model: ModelSpec,
    /// Drives the sampler and model.
    pub seed: u64,
    /// Drives the imputer; shared by every cell with the same imputer so the
    /// imputed training set can be reused.
    pub imputation_seed: u64,
}

impl PipelineConfig {
    pub fn imputer_name(&self) -> &'static str {
        self.imputer.as_ref().map_or(NO_IMPUTATION, ImputerKind::name)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.sampler.validate()?;
        if let Some(i) = &self.imputer {
            i.validate()?;
        } else {
            if !self.model.accepts_missing() {
                return Err(Error::Config(format!(
                    "model `{}` cannot run without imputation",
                    self.model_label
                )));
            }
            if self.sampler.needs_complete_rows() {
                return Err(Error::Config(format!(
                    "sampler `{}` needs imputed data",
                    self.sampler.name()
                )));
            }
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config("target_ratio must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }
}

impl GridConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: GridConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(p) = &cfg.panel {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.panel = Some(base.join(p));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must be in (0, 1)".into()));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        for name in &self.imputers {
            self.imputer(name)?;
        }
        for name in self.samplers.iter().chain(&self.sparse_native_samplers) {
            self.sampler(name)?;
        }
        for label in self.models.iter().chain(&self.sparse_native) {
            self.model(label)?;
        }
        Ok(())
    }

    pub fn imputer(&self, name: &str) -> Result<Option<ImputerKind>> {
        Ok(Some(match name {
            NO_IMPUTATION => return Ok(None),
            "mean" => ImputerKind::Mean,
            "median" => ImputerKind::Median,
            "knn" => ImputerKind::Knn { k: self.knn.k },
            "mice" => ImputerKind::Mice(self.mice),
            "gain" => ImputerKind::Gain(self.gain),
            _ => return Err(Error::Config(format!("unknown imputer `{name}`"))),
        }))
    }

    pub fn sampler(&self, name: &str) -> Result<SamplerKind> {
        let o = &self.oversample;
        Ok(match name {
            "none" => SamplerKind::None,
            "random" => SamplerKind::Random,
            "smote" => SamplerKind::Smote { k: o.k },
            "borderline_smote" => SamplerKind::BorderlineSmote { k: o.k, m: o.m },
            "adasyn" => SamplerKind::Adasyn { k: o.k, beta: o.beta },
            _ => return Err(Error::Config(format!("unknown sampler `{name}`"))),
        })
    }

    /// Maps a model label to its family. The boosting labels all use the
    /// built-in GBDT.
    pub fn model(&self, label: &str) -> Result<ModelSpec> {
        Ok(match label {
            "logistic" => ModelSpec::Logistic(self.logistic),
            "random_forest" => ModelSpec::RandomForest(self.random_forest),
            "gbdt" | "xgboost" | "lightgbm" | "catboost" => ModelSpec::Gbdt(self.gbdt),
            "mlp" => ModelSpec::Mlp(self.mlp),
            _ => return Err(Error::Config(format!("unknown model `{label}`"))),
        })
    }
}

/// Cartesian product imputer x sampler x model (invalid cells dropped), then
/// the sparse-native cells. Config `i` gets seed `derive_seed_index(seed, i)`.
pub fn expand_grid(cfg: &GridConfig) -> Result<Vec<PipelineConfig>> {
    if cfg.imputers.is_empty() || cfg.samplers.is_empty() || cfg.models.is_empty() {
        return Err(Error::Config("grid axes must be non-empty".into()));
    }
    let mut cells = Vec::new();
    for i in &cfg.imputers {
        for s in &cfg.samplers {
            for m in &cfg.models {
                cells.push((cfg.imputer(i)?, cfg.sampler(s)?, m.clone()));
            }
        }
    }
    for m in &cfg.sparse_native {
        for s in &cfg.sparse_native_samplers {
            cells.push((None, cfg.sampler(s)?, m.clone()));
        }
    }
    let mut out = Vec::with_capacity(cells.len());
    for (imputer, sampler, label) in cells {
        let imputation_seed = derive_seed(
            cfg.seed,
            &format!("impute:{}", serde_json::to_string(&imputer)?),
        );
        let pc = PipelineConfig {
            index: out.len(),
            imputer,
            sampler,
            target_ratio: cfg.oversample.target_ratio,
            model: cfg.model(&label)?,
            model_label: label,
            seed: 0,
            imputation_seed,
        };
        if pc.is_valid() {
            out.push(PipelineConfig {
                seed: derive_seed_index(cfg.seed, pc.index as u64),
                ..pc
            });
        }
    }
    Ok(out)
}
