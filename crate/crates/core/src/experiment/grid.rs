use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::Split;
use crate::error::{Error, Result};

use super::config::PipelineConfig;
use super::pipeline::{impute_split, record_from, run_pipeline, ImputedPair, RunRecord};

fn imputation_key(config: &PipelineConfig) -> Option<String> {
    config
        .imputer
        .as_ref()
        .map(|i| format!("{}#{}", serde_json::to_string(i).unwrap_or_default(), config.imputation_seed))
}

/// Runs every config on a pool of `jobs` threads. Each distinct imputation
/// is computed once and shared; records come back in config order and are
/// identical for any `jobs`.
pub fn run_grid(split: &Split, configs: &[PipelineConfig], jobs: usize) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let mut distinct: Vec<(String, &PipelineConfig)> = Vec::new();
    for c in configs {
        if let Some(k) = imputation_key(c) {
            if !distinct.iter().any(|(d, _)| *d == k) {
                distinct.push((k, c));
            }
        }
    }
    let imputed: HashMap<String, (std::result::Result<ImputedPair, Error>, f64)> = pool.install(|| {
        distinct
            .par_iter()
            .map(|(k, c)| {
                let start = Instant::now();
                let kind = c.imputer.as_ref().expect("keyed configs have an imputer");
                let out = c.validate().and_then(|_| impute_split(split, kind, c.imputation_seed));
                (k.clone(), (out, start.elapsed().as_secs_f64()))
            })
            .collect()
    });

    Ok(pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let start = Instant::now();
                let (pair, impute_secs) = match imputation_key(c).and_then(|k| imputed.get(&k)) {
                    Some((Ok(p), s)) => (Some(p), *s),
                    Some((Err(e), s)) => return RunRecord::failed(c, e, *s),
                    None => (None, 0.0),
                };
                let out = run_pipeline(split, c, pair);
                record_from(c, out, impute_secs + start.elapsed().as_secs_f64())
            })
            .collect()
    }))
}
