//! Tabular pipeline for screening companies likely to become activist-fund
//! targets: panel ingestion and labeling, industry-relative percentile
//! transforms, missing-value imputation, minority oversampling, four
//! classifier families, AUC-ROC evaluation over a configuration grid, and
//! Shapley-value explanations.

pub mod data;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod impute;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod oversample;
pub mod preprocess;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
pub use matrix::Matrix;
