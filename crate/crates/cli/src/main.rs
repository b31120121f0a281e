//! `activist`: command-line driver for the target-screening pipeline.
//!
//! Exit codes: 0 success, 1 invalid arguments or inputs, 2 failure while
//! running. Inputs are read and checked before anything is written.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use activist_core::data::{
    assign_labels, load_campaigns, load_panel, load_snapshots, stratified_split, write_panel,
    year_end_snapshots, FeatureSchema, Panel,
};
use activist_core::experiment::{
    expand_grid, prepare_split, read_records, run_grid, write_records, write_report, GridConfig,
};
use activist_core::explain::{self, Background, ExportPaths, Method, DEFAULT_BACKGROUND_ROWS};
use activist_core::impute::{
    impute_dispatch, GainConfig, ImputationPlan, ImputerKind, MiceParams,
};
use activist_core::metrics::{auc_roc, roc_curve};
use activist_core::models::{Classifier, ForestParams, GbdtParams, LogisticParams, MlpParams, ModelSpec};
use activist_core::oversample::{oversample, SamplerKind};
use activist_core::preprocess::{percentile_transform, Standardizer};
use activist_core::rng::derive_seed;
use activist_core::synthgen::{generate, SynthSpec};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "activist", version, about = "Screen company-year panels for likely activist-fund targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled panel with planted signal.
    Synth(SynthArgs),
    /// Attach forward-window campaign labels to a panel.
    Label(LabelArgs),
    /// Stratified train/test split, optionally after the percentile transform.
    Split(SplitArgs),
    /// Impute the training panel; the test panel gets training medians.
    Impute(ImputeArgs),
    /// Oversample the minority class of a training panel.
    Oversample(OversampleArgs),
    /// Fit a classifier and save it as JSON.
    Train(TrainArgs),
    /// Score a labeled panel with a saved model and report AUC-ROC.
    Evaluate(EvaluateArgs),
    /// Shapley attributions for a saved model, exported as CSV.
    Explain(ExplainArgs),
    /// Run the imputation x oversampling x model grid from a config file.
    Grid(GridArgs),
    /// Rebuild a ranked report from saved grid records.
    Report(ReportArgs),
}

#[derive(clap::Args, Debug)]
struct SynthArgs {
    /// TOML generator spec; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of company-year rows.
    #[arg(long)]
    rows: Option<usize>,
    /// Zero every planted effect.
    #[arg(long)]
    null: bool,
    /// Output panel CSV.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON sidecar.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// The panel before masking, as CSV.
    #[arg(long)]
    complete: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct LabelArgs {
    #[arg(long)]
    panel: PathBuf,
    /// CSV with company_id,start_date[,end_date].
    #[arg(long)]
    campaigns: PathBuf,
    /// CSV with company_id,year,snapshot_date; default is December 31.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Apply the industry-year percentile transform first.
    #[arg(long)]
    percentile: bool,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ImputeMethod {
    Mean,
    Median,
    Knn,
    Mice,
    Gain,
}

#[derive(clap::Args, Debug)]
struct ImputeArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum)]
    method: ImputeMethod,
    /// Neighbours for knn.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Chained-equation sweeps for mice.
    #[arg(long)]
    iterations: Option<usize>,
    /// Training steps for gain.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SampleMethod {
    None,
    Random,
    Smote,
    BorderlineSmote,
    Adasyn,
}

#[derive(clap::Args, Debug)]
struct OversampleArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, value_enum)]
    method: SampleMethod,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Neighbourhood size for the borderline DANGER test.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// ADASYN volume: synthetics = (majority - minority) * beta.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Minority/majority ratio to reach.
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModelKind {
    Logistic,
    RandomForest,
    Gbdt,
    Mlp,
}

#[derive(clap::Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    /// TOML with hyperparameter sections (logistic, random_forest, gbdt, mlp).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    panel: PathBuf,
    /// ROC curve CSV (fpr,tpr,threshold).
    #[arg(long)]
    roc: Option<PathBuf>,
    /// Scores JSON; AUC is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ExplainMethod {
    /// linear for logistic models, kernel otherwise
    Auto,
    Exact,
    Kernel,
    Linear,
}

#[derive(clap::Args, Debug)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    /// Rows to explain.
    #[arg(long)]
    panel: PathBuf,
    /// Training panel the background rows are drawn from.
    #[arg(long)]
    background: PathBuf,
    #[arg(long, value_enum, default_value_t = ExplainMethod::Auto)]
    method: ExplainMethod,
    /// Coalitions per instance for the kernel method.
    #[arg(long, default_value_t = 2048)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_BACKGROUND_ROWS)]
    background_rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for bar.csv, beeswarm.csv and coefficients.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct GridArgs {
    /// TOML grid config.
    #[arg(long)]
    config: PathBuf,
    /// Labeled panel CSV; overrides the config.
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Report CSV.
    #[arg(long)]
    out: PathBuf,
    /// Human-readable table.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Every run record as JSON, for `report`.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ReportArgs {
    /// Records JSON written by `grid --records`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    threshold: f64,
    /// Fill the seconds column.
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    table: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

type CliResult<T> = Result<T, Failure>;

fn invalid<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Invalid(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn schema() -> Arc<FeatureSchema> {
    Arc::new(FeatureSchema::canonical())
}

fn read_panel(path: &Path) -> CliResult<Panel> {
    load_panel(path, schema()).map_err(invalid)
}

fn check_outputs(paths: &[&Path]) -> CliResult<()> {
    for p in paths {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                return Err(Failure::Invalid(format!("output directory {} does not exist", dir.display())));
            }
        }
    }
    Ok(())
}

/// Model plus the standardizer fitted alongside it.
#[derive(Serialize, Deserialize)]
struct ModelBundle {
    format: String,
    version: u32,
    standardizer: Option<Standardizer>,
    classifier: Classifier,
}

const BUNDLE_FORMAT: &str = "activist-model-bundle";

impl ModelBundle {
    fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let b: ModelBundle = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        if b.format != BUNDLE_FORMAT || b.version != 1 {
            return Err(invalid(format!("{} is not a model bundle this version can read", path.display())));
        }
        Ok(b)
    }

    fn inputs(&self, panel: &Panel) -> CliResult<Panel> {
        match &self.standardizer {
            Some(s) => s.transform_panel(panel).map_err(invalid),
            None => Ok(panel.clone()),
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Label(a) => label(a),
        Command::Split(a) => split(a),
        Command::Impute(a) => impute(a),
        Command::Oversample(a) => sample(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Explain(a) => explain_cmd(a),
        Command::Grid(a) => grid(a),
        Command::Report(a) => report(a),
    }
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let mut spec = match &a.config {
        Some(p) => SynthSpec::load(p).map_err(invalid)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(n) = a.rows {
        spec.n_rows = n;
    }
    if a.null {
        spec = spec.null();
    }
    let schema = schema();
    spec.validate(&schema).map_err(invalid)?;
    let outs: Vec<&Path> = [Some(&a.out), a.truth.as_ref(), a.complete.as_ref()]
        .into_iter()
        .flatten()
        .map(PathBuf::as_path)
        .collect();
    check_outputs(&outs)?;
    let (panel, truth) = generate(&spec, schema).map_err(runtime)?;
    write_panel(&panel, &a.out).map_err(runtime)?;
    if let Some(p) = &a.truth {
        truth.write_json(p).map_err(runtime)?;
    }
    if let (Some(p), Some(c)) = (&a.complete, &truth.complete) {
        write_panel(c, p).map_err(runtime)?;
    }
    let (neg, pos) = panel.class_counts();
    println!("wrote {} rows ({pos} positive, {neg} negative) to {}", panel.len(), a.out.display());
    Ok(())
}

fn label(a: LabelArgs) -> CliResult<()> {
    let panel = read_panel(&a.panel)?;
    let campaigns = load_campaigns(&a.campaigns).map_err(invalid)?;
    let snaps = match &a.snapshots {
        Some(p) => load_snapshots(p).map_err(invalid)?,
        None => year_end_snapshots(&panel),
    };
    check_outputs(&[&a.out])?;
    let outcome = assign_labels(&panel, &campaigns, &snaps).map_err(invalid)?;
    write_panel(&outcome.panel, &a.out).map_err(runtime)?;
    let (neg, pos) = outcome.panel.class_counts();
    println!(
        "labeled {} rows ({pos} positive, {neg} negative); excluded {} in-campaign rows; {} campaigns matched no company",
        outcome.panel.len(),
        outcome.excluded_rows,
        outcome.unknown_company_campaigns
    );
    Ok(())
}

fn split(a: SplitArgs) -> CliResult<()> {
    let panel = read_panel(&a.panel)?;
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(invalid("--test-fraction must be in (0, 1)"));
    }
    check_outputs(&[&a.train_out, &a.test_out])?;
    let base = if a.percentile { percentile_transform(&panel) } else { panel };
    let s = stratified_split(&base, 1.0 - a.test_fraction, a.seed).map_err(invalid)?;
    write_panel(&s.train, &a.train_out).map_err(runtime)?;
    write_panel(&s.test, &a.test_out).map_err(runtime)?;
    println!("train {} rows, test {} rows", s.train.len(), s.test.len());
    Ok(())
}

fn impute(a: ImputeArgs) -> CliResult<()> {
    let train = read_panel(&a.train)?;
    let test = read_panel(&a.test)?;
    let kind = match a.method {
        ImputeMethod::Mean => ImputerKind::Mean,
        ImputeMethod::Median => ImputerKind::Median,
        ImputeMethod::Knn => ImputerKind::Knn { k: a.k },
        ImputeMethod::Mice => {
            let d = MiceParams::default();
            ImputerKind::Mice(MiceParams {
                iterations: a.iterations.unwrap_or(d.iterations),
                ..d
            })
        }
        ImputeMethod::Gain => {
            let d = GainConfig::default();
            ImputerKind::Gain(GainConfig {
                steps: a.steps.unwrap_or(d.steps),
                ..d
            })
        }
    };
    kind.validate().map_err(invalid)?;
    check_outputs(&[&a.train_out, &a.test_out])?;
    let plan = ImputationPlan::by_category(train.schema());
    let (tr, te) = impute_dispatch(&train, &test, &kind, &plan, a.seed).map_err(runtime)?;
    write_panel(&tr.panel, &a.train_out).map_err(runtime)?;
    write_panel(&te.panel, &a.test_out).map_err(runtime)?;
    for w in tr.warnings.iter().chain(&te.warnings) {
        eprintln!("warning: {w}");
    }
    println!("imputed {} train and {} test rows with {}", tr.panel.len(), te.panel.len(), kind.name());
    Ok(())
}

fn sample(a: OversampleArgs) -> CliResult<()> {
    let panel = read_panel(&a.panel)?;
    let kind = match a.method {
        SampleMethod::None => SamplerKind::None,
        SampleMethod::Random => SamplerKind::Random,
        SampleMethod::Smote => SamplerKind::Smote { k: a.k },
        SampleMethod::BorderlineSmote => SamplerKind::BorderlineSmote { k: a.k, m: a.m },
        SampleMethod::Adasyn => SamplerKind::Adasyn { k: a.k, beta: a.beta },
    };
    kind.validate().map_err(invalid)?;
    if !(a.ratio > 0.0 && a.ratio <= 1.0) {
        return Err(invalid("--ratio must be in (0, 1]"));
    }
    check_outputs(&[&a.out])?;
    let out = oversample(&panel, &kind, a.ratio, a.seed).map_err(invalid)?;
    write_panel(&out.panel, &a.out).map_err(runtime)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    println!("added {} rows; {} total", out.synthetics.len(), out.panel.len());
    Ok(())
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct Hyperparameters {
    logistic: LogisticParams,
    random_forest: ForestParams,
    gbdt: GbdtParams,
    mlp: MlpParams,
}

fn train(a: TrainArgs) -> CliResult<()> {
    let panel = read_panel(&a.panel)?;
    let hp: Hyperparameters = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        None => Hyperparameters::default(),
    };
    let spec = match a.model {
        ModelKind::Logistic => ModelSpec::Logistic(hp.logistic),
        ModelKind::RandomForest => ModelSpec::RandomForest(hp.random_forest),
        ModelKind::Gbdt => ModelSpec::Gbdt(hp.gbdt),
        ModelKind::Mlp => ModelSpec::Mlp(hp.mlp),
    };
    spec.validate().map_err(invalid)?;
    panel.labels().map_err(invalid)?;
    if panel.missing_count() > 0 && !spec.accepts_missing() {
        return Err(invalid(format!("{} needs a complete panel; impute first", spec.name())));
    }
    check_outputs(&[&a.out])?;
    let standardizer = spec.needs_standardization().then(|| Standardizer::fit_panel(&panel));
    let inputs = match &standardizer {
        Some(s) => s.transform_panel(&panel).map_err(runtime)?,
        None => panel,
    };
    let model = activist_core::models::fit_panel(&spec, &inputs, derive_seed(a.seed, "model")).map_err(runtime)?;
    let bundle = ModelBundle {
        format: BUNDLE_FORMAT.into(),
        version: 1,
        standardizer,
        classifier: model,
    };
    let text = serde_json::to_string(&bundle).map_err(runtime)?;
    std::fs::write(&a.out, text + "\n").map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    if bundle.classifier.converged() == Some(false) {
        eprintln!("warning: {} did not converge", spec.name());
    }
    println!("trained {} on {} rows", spec.name(), inputs.len());
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    auc: f64,
    rows: usize,
    positives: usize,
    probabilities: Vec<f64>,
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let panel = read_panel(&a.panel)?;
    let labels = panel.labels().map_err(invalid)?;
    let x = bundle.inputs(&panel)?.to_matrix();
    if x.cols() != bundle.classifier.n_features() {
        return Err(invalid("panel width does not match the model"));
    }
    if x.has_missing() && !bundle.classifier.accepts_missing() {
        return Err(invalid("panel has missing values the model cannot score"));
    }
    let outs: Vec<&Path> = [a.roc.as_ref(), a.out.as_ref()].into_iter().flatten().map(PathBuf::as_path).collect();
    check_outputs(&outs)?;
    let margins = bundle.classifier.predict_margin(&x).map_err(runtime)?;
    let auc = auc_roc(&margins, &labels).map_err(invalid)?;
    if let Some(p) = &a.roc {
        roc_curve(&margins, &labels).map_err(runtime)?.save_csv(p).map_err(runtime)?;
    }
    if let Some(p) = &a.out {
        let probabilities = bundle.classifier.predict_proba(&x).map_err(runtime)?;
        let ev = Evaluation {
            auc,
            rows: labels.len(),
            positives: labels.iter().filter(|&&l| l).count(),
            probabilities,
        };
        let text = serde_json::to_string_pretty(&ev).map_err(runtime)?;
        std::fs::write(p, text + "\n").map_err(|e| runtime(format!("{}: {e}", p.display())))?;
    }
    println!("auc_roc {auc:.6}");
    Ok(())
}

fn explain_cmd(a: ExplainArgs) -> CliResult<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let panel = read_panel(&a.panel)?;
    let bg_panel = read_panel(&a.background)?;
    let x = bundle.inputs(&panel)?.to_matrix();
    let bg_x = bundle.inputs(&bg_panel)?.to_matrix();
    if x.has_missing() || bg_x.has_missing() {
        return Err(invalid("explanations need complete panels; impute first"));
    }
    let is_linear = bundle.classifier.coefficients().is_some();
    let method = match a.method {
        ExplainMethod::Auto if is_linear => Method::Linear,
        ExplainMethod::Auto | ExplainMethod::Kernel => Method::Kernel { n_samples: a.samples },
        ExplainMethod::Exact => Method::Exact,
        ExplainMethod::Linear => Method::Linear,
    };
    if method == Method::Linear && !is_linear {
        return Err(invalid("linear attributions need a logistic model"));
    }
    if !a.out.is_dir() {
        return Err(invalid(format!("output directory {} does not exist", a.out.display())));
    }
    let bg = Background::sample(&bg_x, a.background_rows, derive_seed(a.seed, "background")).map_err(invalid)?;
    let summary = explain::explain(&bundle.classifier, &x, &bg, method, a.seed).map_err(runtime)?;
    let bar = a.out.join("bar.csv");
    let bees = a.out.join("beeswarm.csv");
    let coef = a.out.join("coefficients.csv");
    let paths = ExportPaths {
        bar: &bar,
        beeswarm: &bees,
        coefficients: Some(&coef),
    };
    explain::export_explanations(&summary, &panel, &x, &bundle.classifier, &paths).map_err(runtime)?;
    if summary.regularized > 0 {
        eprintln!("warning: {} instances needed a ridge-regularized kernel solve", summary.regularized);
    }
    for (rank, (j, v)) in explain::rank_features(&summary).into_iter().take(5).enumerate() {
        println!("{:>2}. {} {v:.6}", rank + 1, panel.schema().feature(j).name);
    }
    Ok(())
}

fn grid(a: GridArgs) -> CliResult<()> {
    let mut cfg = GridConfig::load(&a.config).map_err(invalid)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    if a.panel.is_some() {
        cfg.panel = a.panel.clone();
    }
    cfg.validate().map_err(invalid)?;
    let panel_path = cfg
        .panel
        .clone()
        .ok_or_else(|| invalid("no panel given (config `panel` or --panel)"))?;
    let panel = read_panel(&panel_path)?;
    panel.labels().map_err(invalid)?;
    let configs = expand_grid(&cfg).map_err(invalid)?;
    let outs: Vec<&Path> = [Some(&a.out), a.table.as_ref(), a.records.as_ref()]
        .into_iter()
        .flatten()
        .map(PathBuf::as_path)
        .collect();
    check_outputs(&outs)?;
    let split = prepare_split(&panel, cfg.percentile, cfg.test_fraction, cfg.seed).map_err(invalid)?;
    let records = run_grid(&split, &configs, cfg.jobs).map_err(runtime)?;
    let shown = write_report(&records, cfg.threshold, &a.out, a.table.as_deref(), cfg.timings).map_err(runtime)?;
    if let Some(p) = &a.records {
        write_records(&records, p).map_err(runtime)?;
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    println!(
        "ran {} configurations ({failed} failed); {shown} at or above {}",
        records.len(),
        cfg.threshold
    );
    Ok(())
}

fn report(a: ReportArgs) -> CliResult<()> {
    let records = read_records(&a.records).map_err(invalid)?;
    if records.is_empty() {
        return Err(invalid("records file is empty"));
    }
    let outs: Vec<&Path> = [Some(&a.out), a.table.as_ref()].into_iter().flatten().map(PathBuf::as_path).collect();
    check_outputs(&outs)?;
    let shown = write_report(&records, a.threshold, &a.out, a.table.as_deref(), a.timings).map_err(runtime)?;
    println!("{shown} of {} records at or above {}", records.len(), a.threshold);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
