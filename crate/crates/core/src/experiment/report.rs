use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::oversample::SamplerKind;

use super::pipeline::RunRecord;

pub const REPORT_HEADER: [&str; 7] = [
    "imputation",
    "oversampling",
    "model",
    "auc_test",
    "auc_train",
    "seconds",
    "warnings",
];
pub const TABLE_HEADER: [&str; 4] = ["Imputation", "Oversampling", "ML Method", "AUC-ROC"];

pub fn imputer_display(name: &str) -> &str {
    match name {
        "mean" => "Mean",
        "median" => "Median",
        "knn" => "KNN",
        "mice" => "MICE",
        "gain" => "GAIN",
        "none" => "None",
        other => other,
    }
}

pub fn sampler_display(kind: &SamplerKind) -> &'static str {
    match kind {
        SamplerKind::None => "no oversampling",
        SamplerKind::Random => "ROSE",
        SamplerKind::Smote { .. } => "SMOTE",
        SamplerKind::BorderlineSmote { .. } => "Borderline SMOTE",
        SamplerKind::Adasyn { .. } => "ADASYN",
    }
}

pub fn model_display<'a>(label: &'a str, spec: &ModelSpec) -> &'a str {
    match label {
        "logistic" => "Logistic Regression",
        "random_forest" => "Random Forest",
        "xgboost" => "XGBoost",
        "lightgbm" => "LightGBM",
        "catboost" => "CatBoost",
        "gbdt" => "GBDT",
        "mlp" => "Neural Network",
        _ => match spec {
            ModelSpec::Logistic(_) => "Logistic Regression",
            ModelSpec::RandomForest(_) => "Random Forest",
            ModelSpec::Gbdt(_) => "GBDT",
            ModelSpec::Mlp(_) => "Neural Network",
        },
    }
}

/// Records with `auc_test >= threshold`, best first; equal scores keep
/// config order. A threshold of zero or less also keeps failed runs, last.
pub fn select_records(records: &[RunRecord], threshold: f64) -> Vec<&RunRecord> {
    let mut ok: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.auc_test.is_some_and(|a| a >= threshold))
        .collect();
    ok.sort_by(|a, b| {
        b.auc_test
            .unwrap()
            .total_cmp(&a.auc_test.unwrap())
            .then(a.config.index.cmp(&b.config.index))
    });
    if threshold <= 0.0 {
        ok.extend(records.iter().filter(|r| r.auc_test.is_none()));
    }
    ok
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|a| format!("{a:.6}")).unwrap_or_default()
}

/// CSV with [`REPORT_HEADER`]. `seconds` is left blank unless `timings`.
pub fn report_csv(records: &[RunRecord], threshold: f64, timings: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for r in select_records(records, threshold) {
        let mut notes = r.warnings.clone();
        if let Some(e) = &r.error {
            notes.push(format!("error: {e}"));
        }
        w.write_record([
            r.config.imputer_name().to_string(),
            r.config.sampler.name().to_string(),
            r.config.model_label.clone(),
            fmt_opt(r.auc_test),
            fmt_opt(r.auc_train),
            if timings { format!("{:.3}", r.seconds) } else { String::new() },
            notes.join("; "),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Fixed-width table with [`TABLE_HEADER`], AUC to three decimals.
pub fn report_table(records: &[RunRecord], threshold: f64) -> String {
    let rows: Vec<[String; 4]> = select_records(records, threshold)
        .into_iter()
        .map(|r| {
            [
                imputer_display(r.config.imputer_name()).to_string(),
                sampler_display(&r.config.sampler).to_string(),
                model_display(&r.config.model_label, &r.config.model).to_string(),
                r.auc_test.map_or("failed".to_string(), |a| format!("{a:.3}")),
            ]
        })
        .collect();
    let mut width = TABLE_HEADER.map(str::len);
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: [&str; 4]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            let _ = write!(s, "{c:<w$}", w = width[i]);
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(TABLE_HEADER);
    out.push_str(&width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-"));
    out.push('\n');
    for r in &rows {
        out.push_str(&line([&r[0], &r[1], &r[2], &r[3]]));
    }
    out
}

/// Writes the CSV and, if given, the table. Returns the number of rows.
pub fn write_report(
    records: &[RunRecord],
    threshold: f64,
    csv_path: &Path,
    table_path: Option<&Path>,
    timings: bool,
) -> Result<usize> {
    if records.is_empty() {
        return Err(Error::invalid("no records to report"));
    }
    let csv = report_csv(records, threshold, timings)?;
    std::fs::write(csv_path, csv).map_err(|e| Error::io(csv_path, e))?;
    if let Some(p) = table_path {
        std::fs::write(p, report_table(records, threshold)).map_err(|e| Error::io(p, e))?;
    }
    Ok(select_records(records, threshold).len())
}

pub fn write_records(records: &[RunRecord], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(records)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
