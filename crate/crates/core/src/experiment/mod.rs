//! Grid expansion, per-cell pipelines with train-only fitting, parallel
//! sweeps and ranked reports.

mod config;
mod grid;
mod pipeline;
mod report;

pub use config::{expand_grid, GridConfig, KnnSection, OversampleSection, PipelineConfig, NO_IMPUTATION};
pub use grid::run_grid;
pub use pipeline::{
    impute_split, prepare_split, run_config, run_pipeline, ImputedPair, PipelineOutput, RunRecord,
};
pub use report::{
    imputer_display, model_display, read_records, report_csv, report_table, sampler_display,
    select_records, write_records, write_report, REPORT_HEADER, TABLE_HEADER,
};
