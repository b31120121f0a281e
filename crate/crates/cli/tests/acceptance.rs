//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances and runtime budgets are fixed
//! below; a criterion over its budget fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use activist_core::data::{Category, FeatureSchema, Instance, Panel, Split};
use activist_core::experiment::{
    expand_grid, impute_split, prepare_split, run_pipeline, select_records, write_report, GridConfig,
    PipelineConfig, PipelineOutput, RunRecord, TABLE_HEADER,
};
use activist_core::explain::{
    export_explanations, rank_features, shap_exact, shap_kernel, shap_linear, Background, ExportPaths,
    MarginModel, ShapSummary, DEFAULT_BACKGROUND_ROWS, TOP_FEATURES,
};
use activist_core::impute::{
    discriminator_loss, generator_loss, impute_train, masked_cell_rmse, GainBatch, GainConfig, ImputationPlan,
    ImputerKind, MiceParams, Net,
};
use activist_core::matrix::Matrix;
use activist_core::metrics::auc_roc;
use activist_core::models::{
    self, logistic_gradient, logistic_objective, ForestParams, GbdtParams, LogisticParams, MlpModel,
    MlpParams, ModelSpec,
};
use activist_core::oversample::{
    oversample_adasyn, oversample_borderline, oversample_random, oversample_smote, Oversampled,
};
use activist_core::rng::{rng_from_seed, Rng};
use activist_core::synthgen::{generate, SynthSpec};
use rand::Rng as _;

const AUC_TOL: f64 = 1e-12;
const SHAP_KERNEL_TOL: f64 = 1e-10;
const SHAP_LINEAR_TOL: f64 = 1e-10;
const LOCAL_ACCURACY_TOL: f64 = 1e-6;
const GRAD_TOL_LOGISTIC: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-4;
const SIGNAL_AUC: f64 = 0.75;
const NULL_BAND: f64 = 0.07;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn schema() -> Arc<FeatureSchema> {
    Arc::new(FeatureSchema::canonical())
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn statement() -> Outcome {
    outcome(
        true,
        "published AUC figures (best 0.782) come from proprietary market data and are not reproduced; \
         criteria 2-11 check structure, oracles and synthetic-data behaviour instead",
    )
}

fn grid_shape() -> Outcome {
    let full = expand_grid(&GridConfig::default()).map(|c| c.len());
    let base = expand_grid(&GridConfig { sparse_native: vec![], ..GridConfig::default() }).map(|c| c.len());
    match (base, full) {
        (Ok(b), Ok(f)) => outcome(b == 120 && f == 123, format!("{b} configs, {f} with sparse-native cells (want 120, 123)")),
        (b, f) => outcome(false, format!("expand_grid failed: {b:?} {f:?}")),
    }
}

fn pairwise_auc(s: &[f64], y: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] && !y[j] {
                pairs += 1.0;
                wins += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn auc_oracle() -> Outcome {
    let mut rng = rng_from_seed(3);
    let mut worst: f64 = 0.0;
    let mut invariant = true;
    for v in 0..1000 {
        let n = rng.random_range(2..300);
        let tied = v % 2 == 0;
        let s: Vec<f64> = (0..n)
            .map(|_| if tied { f64::from(rng.random_range(0..8)) } else { rng.random_range(-3.0..3.0) })
            .collect();
        let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        y[0] = true;
        y[1] = false;
        let fast = auc_roc(&s, &y).expect("both classes present");
        worst = worst.max((fast - pairwise_auc(&s, &y)).abs());
        let moved: Vec<f64> = s.iter().map(|x| x.powi(3) + 2.0 * x + 7.0).collect();
        invariant &= auc_roc(&moved, &y).expect("both classes present") == fast;
    }
    outcome(
        worst <= AUC_TOL && invariant,
        format!("max |fast - pairwise| = {worst:.1e} over 1000 vectors (tol {AUC_TOL:.0e}); monotone invariance exact: {invariant}"),
    )
}

fn signal_data(n: usize, d: usize, seed: u64) -> (Matrix, Vec<bool>) {
    let mut rng = rng_from_seed(seed);
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect());
    let y = (0..n)
        .map(|i| {
            let r = x.row(i);
            let z = 1.2 * r[0] - r[1] + 0.8 * r[2] * r[3] - 0.5 * r[4];
            rng.random::<f64>() < 1.0 / (1.0 + (-z).exp())
        })
        .collect();
    (x, y)
}

fn shap_oracle() -> Outcome {
    let d = 10;
    let (x, y) = signal_data(400, d, 5);
    let specs = [
        ModelSpec::Logistic(LogisticParams::default()),
        ModelSpec::RandomForest(ForestParams { n_trees: 30, max_depth: Some(6), ..ForestParams::default() }),
        ModelSpec::Gbdt(GbdtParams { n_trees: 40, max_depth: 3, ..GbdtParams::default() }),
    ];
    let bg = Background::new(x.select_rows(&(0..10).collect::<Vec<_>>())).expect("complete rows");
    let instances: Vec<usize> = (200..300).collect();
    let full = (1usize << d) - 2;
    let mut kernel_err: f64 = 0.0;
    let mut local_err: f64 = 0.0;
    for spec in &specs {
        let model = match models::fit(spec, &x, &y, 1) {
            Ok(m) => m,
            Err(e) => return outcome(false, format!("fit {}: {e}", spec.name())),
        };
        for &i in &instances {
            let row = x.row(i);
            let (Ok(exact), Ok(kernel)) = (shap_exact(&model, row, &bg), shap_kernel(&model, row, &bg, full, i as u64))
            else {
                return outcome(false, "attribution failed");
            };
            for j in 0..d {
                kernel_err = kernel_err.max((exact.values[j] - kernel.values[j]).abs());
            }
            let fx = model.margin(row);
            for a in [&exact, &kernel] {
                let total = a.base_value + a.values.iter().sum::<f64>();
                local_err = local_err.max((total - fx).abs() / fx.abs().max(1.0));
            }
        }
    }
    let logistic = models::fit(&specs[0], &x, &y, 0).expect("logistic fits");
    let point = Background::new(Matrix::from_rows(&[x.row(0)])).expect("complete row");
    let xs = x.select_rows(&instances);
    let linear = shap_linear(&logistic, &xs, &point).expect("logistic has coefficients");
    let mut linear_err: f64 = 0.0;
    for (r, &i) in instances.iter().enumerate() {
        let exact = shap_exact(&logistic, x.row(i), &point).expect("d <= 15");
        for j in 0..d {
            linear_err = linear_err.max((linear.attributions.get(r, j) - exact.values[j]).abs());
        }
    }
    outcome(
        kernel_err <= SHAP_KERNEL_TOL && linear_err <= SHAP_LINEAR_TOL && local_err <= LOCAL_ACCURACY_TOL,
        format!(
            "d={d}, 100 instances x {{logistic, rf, gbdt}}: kernel vs exact {kernel_err:.1e} (tol {SHAP_KERNEL_TOL:.0e}), \
             linear vs exact {linear_err:.1e} (tol {SHAP_LINEAR_TOL:.0e}), local accuracy {local_err:.1e} (tol {LOCAL_ACCURACY_TOL:.0e})"
        ),
    )
}

/// `|g - fd| / max(|g|, |fd|)` in the Euclidean norm.
fn grad_error(analytic: &[f64], f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nf = 0.0;
    for j in 0..p.len() {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[j] += h;
        b[j] -= h;
        let fd = (f(&a) - f(&b)) / (2.0 * h);
        diff += (analytic[j] - fd).powi(2);
        na += analytic[j].powi(2);
        nf += fd * fd;
    }
    diff.sqrt() / na.sqrt().max(nf.sqrt()).max(1e-12)
}

fn gradient_checks() -> Outcome {
    let mut rng = rng_from_seed(11);
    let (mut lr, mut mlp, mut gen, mut disc): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for point in 0..20u64 {
        let (x, y) = signal_data(40, 5, point);
        let p: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = logistic_gradient(&x, &y, &p[..5], p[5], 0.1);
        lr = lr.max(grad_error(&g, |q| logistic_objective(&x, &y, &q[..5], q[5], 0.1), &p, 1e-5));

        let mut net = MlpModel::init(5, 6, point);
        for v in net.params.iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
        let rows: Vec<usize> = (0..40).collect();
        let (_, g) = net.loss_and_gradient(&x, &y, &rows, 0.01);
        let loss = |q: &[f64]| MlpModel { params: q.to_vec(), ..net.clone() }.loss_and_gradient(&x, &y, &rows, 0.01).0;
        mlp = mlp.max(grad_error(&g, loss, &net.params, 1e-6));

        let (batch, g_net, d_net) = gain_point(&mut rng);
        let (_, gd) = discriminator_loss(&g_net, &d_net, &batch);
        let dl = |q: &[f64]| discriminator_loss(&g_net, &Net { params: q.to_vec(), ..d_net.clone() }, &batch).0;
        disc = disc.max(grad_error(&gd, dl, &d_net.params, 1e-6));
        let (_, gg) = generator_loss(&g_net, &d_net, &batch, 10.0);
        let gl = |q: &[f64]| generator_loss(&Net { params: q.to_vec(), ..g_net.clone() }, &d_net, &batch, 10.0).0;
        gen = gen.max(grad_error(&gg, gl, &g_net.params, 1e-6));
    }
    outcome(
        lr <= GRAD_TOL_LOGISTIC && mlp <= GRAD_TOL && gen <= GRAD_TOL && disc <= GRAD_TOL,
        format!(
            "20 points each, relative error: logistic {lr:.1e} (tol {GRAD_TOL_LOGISTIC:.0e}), mlp {mlp:.1e}, \
             gain generator {gen:.1e}, gain discriminator {disc:.1e} (tol {GRAD_TOL:.0e})"
        ),
    )
}

fn gain_point(rng: &mut Rng) -> (GainBatch, Net, Net) {
    let (n, d, h) = (8, 4, 5);
    let mask: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| if rng.random_bool(0.7) { 1.0 } else { 0.0 }).collect())
        .collect();
    let x: Vec<Vec<f64>> = mask
        .iter()
        .map(|m| m.iter().map(|k| k * rng.random_range(0.0..1.0)).collect())
        .collect();
    let batch = GainBatch::draw(&x, &mask, 0.5, rng);
    let mut g = Net::init(d, h, rng);
    let mut dn = Net::init(d, h, rng);
    for p in g.params.iter_mut().chain(dn.params.iter_mut()) {
        *p += rng.random_range(-0.3..0.3);
    }
    (batch, g, dn)
}

fn random_panel(rng: &mut Rng, n: usize, n_pos: usize, d: usize) -> Panel {
    let schema = Arc::new(FeatureSchema::generic(d, Category::Operation));
    let rows = (0..n)
        .map(|i| {
            let pos = i < n_pos;
            Instance {
                company_id: format!("c{i}"),
                year: 2020,
                industry_l2: "a".into(),
                industry_l3: "a1".into(),
                values: (0..d)
                    .map(|j| Some(if pos { 0.7 } else { 0.0 } + rng.random_range(-1.0..1.0) * (j + 1) as f64))
                    .collect(),
                label: Some(pos),
            }
        })
        .collect();
    Panel::new(schema, rows).expect("valid panel")
}

fn zscored(p: &Panel) -> Vec<Vec<f64>> {
    let x = p.to_matrix();
    let n = x.rows() as f64;
    let stats: Vec<(f64, f64)> = (0..x.cols())
        .map(|j| {
            let c = x.column(j);
            let mu = c.iter().sum::<f64>() / n;
            (mu, (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt())
        })
        .collect();
    x.iter_rows()
        .map(|r| r.iter().zip(&stats).map(|(v, (mu, sd))| (v - mu) / sd).collect())
        .collect()
}

fn by_distance(z: &[Vec<f64>], from: usize, pool: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut c: Vec<(f64, usize)> = pool
        .filter(|&j| j != from)
        .map(|j| (z[from].iter().zip(&z[j]).map(|(a, b)| (a - b).powi(2)).sum(), j))
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    c.into_iter().map(|(_, j)| j).collect()
}

/// Returns the first violated rule, if any.
fn geometry_violation(input: &Panel, out: &Oversampled, k: usize, n_pos: usize) -> Option<String> {
    let n = input.len();
    if out.panel.rows()[..n] != *input.rows() {
        return Some("original rows changed".into());
    }
    let z = zscored(input);
    for (s, row) in out.synthetics.iter().zip(&out.panel.rows()[n..]) {
        let nb = s.neighbor?;
        if row.label != Some(true) || s.parent >= n_pos {
            return Some("synthetic row not from the minority class".into());
        }
        if !by_distance(&z, s.parent, 0..n_pos).iter().take(k).any(|&j| j == nb) {
            return Some(format!("partner {nb} is not among the {k} nearest minority rows of {}", s.parent));
        }
        let (a, b) = (&input.rows()[s.parent].values, &input.rows()[nb].values);
        for j in 0..a.len() {
            let (a, b, v) = (a[j]?, b[j]?, row.values[j]?);
            if v < a.min(b) || v > a.max(b) {
                return Some(format!("value {v} outside [{a}, {b}]"));
            }
        }
    }
    None
}

fn oversampler_geometry() -> Outcome {
    let mut rng = rng_from_seed(17);
    let mut synthetics = 0usize;
    for case in 0..500u64 {
        let n = rng.random_range(20..80);
        let n_pos = rng.random_range(3..n / 3);
        let d = rng.random_range(1..5);
        let k = rng.random_range(1..7);
        let m = rng.random_range(2..13);
        let beta = rng.random_range(0.1..=1.0);
        let p = random_panel(&mut rng, n, n_pos, d);
        let fail = |what: &str, why: String| outcome(false, format!("panel {case} {what}: {why}"));

        let smote = oversample_smote(&p, k, 1.0, case).expect("smote runs");
        if let Some(v) = geometry_violation(&p, &smote, k, n_pos) {
            return fail("smote", v);
        }
        let border = oversample_borderline(&p, k, m, 1.0, case).expect("borderline runs");
        if let Some(v) = geometry_violation(&p, &border, k, n_pos) {
            return fail("borderline", v);
        }
        let z = zscored(&p);
        let m_eff = m.min(n - 1);
        let danger: Vec<usize> = (0..n_pos)
            .filter(|&i| {
                let maj = by_distance(&z, i, 0..n).iter().take(m_eff).filter(|&&j| j >= n_pos).count();
                2 * maj >= m_eff && maj < m_eff
            })
            .collect();
        if !danger.is_empty() && border.synthetics.iter().any(|s| !danger.contains(&s.parent)) {
            return fail("borderline", "seed outside the DANGER set".into());
        }
        let ada = oversample_adasyn(&p, k, beta, case).expect("adasyn runs");
        if let Some(v) = geometry_violation(&p, &ada, k, n_pos) {
            return fail("adasyn", v);
        }
        let g = (n - 2 * n_pos) as f64 * beta;
        if (ada.synthetics.len() as f64 - g).abs() > 0.5 * n_pos as f64 + 1e-9 {
            return fail("adasyn", format!("{} rows for G = {g:.2}", ada.synthetics.len()));
        }
        let dup = oversample_random(&p, 1.0, case).expect("random runs");
        if dup.panel.rows()[n..].iter().zip(&dup.synthetics).any(|(r, s)| r.values != p.rows()[s.parent].values) {
            return fail("random", "duplicate differs from its parent".into());
        }
        synthetics += smote.synthetics.len() + border.synthetics.len() + ada.synthetics.len();
    }
    outcome(true, format!("500 panels, {synthetics} interpolated rows: all between parents, DANGER seeds, ADASYN within +/- n_min/2, exact duplicates"))
}

fn imputation_quality() -> Outcome {
    // One industry, so every column follows a single factor model instead of
    // a mixture of industry-specific centers.
    let spec = SynthSpec {
        n_rows: 5000,
        seed: 21,
        n_industries_l2: 1,
        n_industries_l3_per_l2: 1,
        ..SynthSpec::default()
    }
    .with_uniform_missing(0.2);
    let (panel, truth) = generate(&spec, schema()).expect("synthetic panel");
    let complete = truth.complete.expect("complete panel kept").to_matrix();
    let plan = ImputationPlan::by_category(panel.schema());
    let rmse = |kind: &ImputerKind, seed: u64| {
        let out = impute_train(&panel, kind, &plan, seed).expect("imputation runs");
        masked_cell_rmse(&panel, &out.panel, &complete)
    };
    let mean = rmse(&ImputerKind::Mean, 0);
    let knn = rmse(&ImputerKind::Knn { k: 5 }, 0);
    let mice = rmse(&ImputerKind::Mice(MiceParams::default()), 0);
    let gain: Vec<f64> = (0..3).map(|s| rmse(&ImputerKind::Gain(GainConfig::default()), s)).collect();
    let gain_wins = gain.iter().filter(|&&g| g < mean).count();
    outcome(
        knn < mean && mice < mean && gain_wins >= 2,
        format!(
            "n=5000, 20% MCAR, standardized RMSE: mean {mean:.4}, knn {knn:.4}, mice {mice:.4}, gain [{}] ({gain_wins}/3 below mean)",
            gain.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn reduced_grid(seed: u64) -> GridConfig {
    GridConfig {
        seed,
        imputers: strs(&["median", "knn"]),
        samplers: strs(&["none", "random", "borderline_smote"]),
        models: strs(&["logistic", "random_forest", "gbdt", "mlp"]),
        sparse_native: vec![],
        random_forest: ForestParams { n_trees: 50, max_depth: Some(8), ..ForestParams::default() },
        gbdt: GbdtParams { n_trees: 50, ..GbdtParams::default() },
        mlp: MlpParams { epochs: 20, ..MlpParams::default() },
        ..GridConfig::default()
    }
}

struct GridRun {
    records: Vec<RunRecord>,
    best_logistic: Option<PipelineOutput>,
}

/// Runs every config, sharing one imputation per imputer, and keeps the
/// best-scoring logistic pipeline.
fn run_reduced(split: &Split, configs: &[PipelineConfig]) -> GridRun {
    let mut records = Vec::new();
    let mut best_logistic: Option<PipelineOutput> = None;
    let mut cache: Vec<(String, _)> = Vec::new();
    for c in configs {
        let key = c.imputer_name().to_string();
        if !cache.iter().any(|(k, _)| *k == key) {
            let pair = impute_split(split, c.imputer.as_ref().expect("reduced grid imputes"), c.imputation_seed);
            cache.push((key.clone(), pair));
        }
        let pair = cache.iter().find(|(k, _)| *k == key).map(|(_, p)| p).expect("cached");
        let start = Instant::now();
        let out = match pair {
            Ok(p) => run_pipeline(split, c, Some(p)).map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        let seconds = start.elapsed().as_secs_f64();
        records.push(match &out {
            Ok(o) => RunRecord {
                config: c.clone(),
                auc_test: Some(o.auc_test),
                auc_train: Some(o.auc_train),
                seconds,
                converged: o.model.converged(),
                model_checksum: Some(o.model.checksum()),
                warnings: o.warnings.clone(),
                error: None,
            },
            Err(e) => RunRecord {
                config: c.clone(),
                auc_test: None,
                auc_train: None,
                seconds,
                converged: None,
                model_checksum: None,
                warnings: vec![],
                error: Some(e.clone()),
            },
        });
        if let Ok(o) = out {
            if c.model_label == "logistic" && best_logistic.as_ref().is_none_or(|b| o.auc_test > b.auc_test) {
                best_logistic = Some(o);
            }
        }
    }
    GridRun { records, best_logistic }
}

fn explain_best(out: &PipelineOutput) -> activist_core::Result<ShapSummary> {
    let bg = Background::sample(&out.train.to_matrix(), DEFAULT_BACKGROUND_ROWS, 0)?;
    shap_linear(&out.model, &out.test.to_matrix(), &bg)
}

struct SignalState {
    records: Vec<RunRecord>,
    shap: Option<(ShapSummary, PipelineOutput)>,
}

fn signal_recovery(state: &mut Option<SignalState>) -> Outcome {
    let spec = SynthSpec { seed: 8, ..SynthSpec::default() };
    let (planted, truth) = generate(&spec, schema()).expect("planted panel");
    let (null, _) = generate(&spec.null(), schema()).expect("null panel");
    let cfg = reduced_grid(8);
    let configs = expand_grid(&cfg).expect("reduced grid");
    let split = prepare_split(&planted, true, cfg.test_fraction, cfg.seed).expect("split");
    let run = run_reduced(&split, &configs);
    let failed = run.records.iter().filter(|r| r.error.is_some()).count();
    let best = run.records.iter().filter_map(|r| r.auc_test).fold(0.0, f64::max);

    let signal: BTreeSet<usize> = truth.signal_indices().into_iter().collect();
    let (top_ok, top_names) = match run.best_logistic.as_ref().map(|o| (explain_best(o), o)) {
        Some((Ok(summary), o)) => {
            let top: Vec<usize> = rank_features(&summary).into_iter().take(5).map(|(j, _)| j).collect();
            let names = top.iter().map(|&j| o.test.schema().feature(j).name.clone()).collect::<Vec<_>>().join(", ");
            let ok = signal.iter().all(|j| top.contains(j));
            *state = Some(SignalState { records: run.records.clone(), shap: Some((summary, o.clone())) });
            (ok, names)
        }
        _ => {
            *state = Some(SignalState { records: run.records.clone(), shap: None });
            (false, "no logistic explanation".into())
        }
    };

    let null_split = prepare_split(&null, true, cfg.test_fraction, cfg.seed).expect("split");
    let null_run = run_reduced(&null_split, &configs);
    let null_aucs: Vec<f64> = null_run.records.iter().filter_map(|r| r.auc_test).collect();
    let null_failed = null_run.records.len() - null_aucs.len();
    let lo = null_aucs.iter().copied().fold(1.0, f64::min);
    let hi = null_aucs.iter().copied().fold(0.0, f64::max);
    let null_ok = null_failed == 0 && lo >= 0.5 - NULL_BAND && hi <= 0.5 + NULL_BAND;
    outcome(
        failed == 0 && best >= SIGNAL_AUC && top_ok && null_ok,
        format!(
            "planted: {} cells, {failed} failed, best test AUC {best:.3} (min {SIGNAL_AUC}); best logistic top-5 [{top_names}] \
             holds all planted features: {top_ok}; null: test AUC range [{lo:.3}, {hi:.3}] (want 0.5 +/- {NULL_BAND}), {null_failed} failed",
            run.records.len()
        ),
    )
}

fn perturbed(split: &Split) -> Split {
    let mut m = split.test.to_matrix();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = if (i * 7 + j) % 5 == 0 { f64::NAN } else { m.get(i, j) * 1.7 - 0.3 };
            m.set(i, j, v);
        }
    }
    let moved = split.test.with_matrix(&m).expect("same shape");
    let rows = moved.rows().iter().map(|r| Instance { label: r.label.map(|l| !l), ..r.clone() }).collect();
    Split { test: Panel::new(split.test.schema_arc(), rows).expect("valid panel"), ..split.clone() }
}

fn leakage_sentinels() -> Outcome {
    let spec = SynthSpec { n_rows: 3000, positive_rate: 0.06, seed: 2, ..SynthSpec::default() };
    let (panel, _) = generate(&spec, schema()).expect("panel");
    let cfg = GridConfig {
        imputers: strs(&["median", "knn", "mice", "gain"]),
        samplers: strs(&["none", "random", "smote", "borderline_smote", "adasyn"]),
        models: strs(&["logistic", "random_forest", "gbdt", "mlp"]),
        sparse_native: strs(&["gbdt"]),
        sparse_native_samplers: strs(&["none", "random"]),
        random_forest: ForestParams { n_trees: 20, max_depth: Some(8), ..ForestParams::default() },
        gbdt: GbdtParams { n_trees: 20, ..GbdtParams::default() },
        mlp: MlpParams { epochs: 5, ..MlpParams::default() },
        gain: GainConfig { steps: 300, ..GainConfig::default() },
        mice: MiceParams { iterations: 2, ..MiceParams::default() },
        ..GridConfig::default()
    };
    let configs = expand_grid(&cfg).expect("grid");
    // every imputer, sampler and model appears at least once in this selection
    let picked: Vec<&PipelineConfig> = configs.iter().filter(|c| c.imputer.is_none() || c.index % 21 == 0).collect();
    let split = prepare_split(&panel, true, 0.2, 2).expect("split");
    let other = perturbed(&split);
    let mut changed_test_auc = 0;
    for c in &picked {
        let (a, b) = match (run_pipeline(&split, c, None), run_pipeline(&other, c, None)) {
            (Ok(a), Ok(b)) => (a, b),
            (a, b) => return outcome(false, format!("config {} failed: {:?} / {:?}", c.index, a.err(), b.err())),
        };
        let stage = if a.train != b.train {
            Some("imputed training rows")
        } else if a.standardizer != b.standardizer {
            Some("standardizer")
        } else if a.sampled_rows != b.sampled_rows {
            Some("oversampled rows")
        } else if a.model.checksum() != b.model.checksum() {
            Some("model checksum")
        } else if a.auc_train != b.auc_train {
            Some("train AUC")
        } else {
            None
        };
        if let Some(s) = stage {
            return outcome(false, format!("config {} ({} / {} / {}): {s} moved with test data", c.index, c.imputer_name(), c.sampler.name(), c.model_label));
        }
        changed_test_auc += usize::from(a.auc_test != b.auc_test);
    }
    outcome(
        changed_test_auc == picked.len(),
        format!(
            "{} configs covering 4 imputers + none, 5 samplers, 4 models: imputation, sampling, standardizer, checksum and train AUC unchanged; \
             test AUC moved in {changed_test_auc}",
            picked.len()
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_activist"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn parallel_determinism(dir: &Path) -> Outcome {
    let s = |p: &Path| p.to_str().expect("utf-8 path").to_string();
    let panel = dir.join("panel.csv");
    if let Err(e) = run_cli(&["synth", "--rows", "5000", "--seed", "12", "--out", &s(&panel)]) {
        return outcome(false, format!("synth: {e}"));
    }
    let cfg = dir.join("grid.toml");
    let text = "panel = \"panel.csv\"\nseed = 12\nthreshold = 0.0\n\
                imputers = [\"median\", \"knn\"]\nsamplers = [\"none\", \"random\", \"borderline_smote\"]\n\
                models = [\"logistic\", \"random_forest\", \"gbdt\", \"mlp\"]\nsparse_native = []\n\
                [random_forest]\nn_trees = 50\nmax_depth = 8\n[gbdt]\nn_trees = 50\n[mlp]\nepochs = 20\n";
    std::fs::write(&cfg, text).expect("write config");
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let (csv, table) = (dir.join(format!("report{jobs}.csv")), dir.join(format!("table{jobs}.txt")));
        if let Err(e) = run_cli(&["grid", "--config", &s(&cfg), "--jobs", jobs, "--out", &s(&csv), "--table", &s(&table)]) {
            return outcome(false, format!("grid --jobs {jobs}: {e}"));
        }
        outputs.push((std::fs::read(&csv).expect("report"), std::fs::read(&table).expect("table")));
    }
    let rows = outputs[0].0.iter().filter(|&&b| b == b'\n').count().saturating_sub(1);
    let same = outputs[0] == outputs[1];
    outcome(same && rows == 24, format!("reduced grid (24 cells) on 5000 rows: report and table byte-identical for --jobs 1 and 4: {same} ({rows} rows)"))
}

fn report_fidelity(state: &Option<SignalState>, dir: &Path) -> Outcome {
    let Some(st) = state else {
        return outcome(false, "no grid records from criterion 8");
    };
    let (csv, table) = (dir.join("report.csv"), dir.join("table.txt"));
    let shown = match write_report(&st.records, 0.7, &csv, Some(&table), false) {
        Ok(n) => n,
        Err(e) => return outcome(false, format!("write_report: {e}")),
    };
    let table_text = std::fs::read_to_string(&table).expect("table written");
    let header: Vec<&str> = table_text.lines().next().unwrap_or("").split(" | ").map(str::trim).collect();
    let csv_text = std::fs::read_to_string(&csv).expect("csv written");
    let aucs: Vec<f64> = csv_text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(3).and_then(|v| v.parse().ok()))
        .collect();
    let sorted = aucs.windows(2).all(|w| w[0] >= w[1]);
    let above = aucs.iter().all(|&a| a >= 0.7);
    let expected = select_records(&st.records, 0.7).len();
    let structure_ok = header == TABLE_HEADER && sorted && above && aucs.len() == shown && shown == expected && shown > 0;

    let bees = match &st.shap {
        Some((summary, out)) => {
            let x = out.test.to_matrix();
            let (bar, bee) = (dir.join("bar.csv"), dir.join("beeswarm.csv"));
            let paths = ExportPaths { bar: &bar, beeswarm: &bee, coefficients: None };
            match export_explanations(summary, &out.test, &x, &out.model, &paths) {
                Ok(()) => {
                    let text = std::fs::read_to_string(&bee).expect("beeswarm written");
                    let features: BTreeSet<&str> = text.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
                    let rows = text.lines().count() - 1;
                    Some((features.len(), rows == TOP_FEATURES * out.test.len()))
                }
                Err(_) => None,
            }
        }
        None => None,
    };
    let (n_feat, rows_ok) = bees.unwrap_or((0, false));
    outcome(
        structure_ok && n_feat == TOP_FEATURES && rows_ok,
        format!(
            "table header {header:?}, {shown} rows >= 0.7 sorted descending: {}; beeswarm features {n_feat} (want {TOP_FEATURES}), one row per test instance each: {rows_ok}",
            sorted && above
        ),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut signal_state = None;
    let mut all_pass = true;
    let mut check = |id: u32, name: &str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let pass = o.pass && took <= budget;
        all_pass &= pass;
        println!(
            "{} {id:>2} {name}: {}; {:.1}s (budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    };
    let secs = Duration::from_secs;
    check(1, "published numbers", secs(1), &mut statement);
    check(2, "grid shape", secs(1), &mut grid_shape);
    check(3, "auc oracle", secs(10), &mut auc_oracle);
    check(4, "shapley oracle", secs(60), &mut shap_oracle);
    check(5, "gradient checks", secs(30), &mut gradient_checks);
    check(6, "oversampler geometry", secs(20), &mut oversampler_geometry);
    check(7, "imputation quality", secs(300), &mut imputation_quality);
    check(8, "signal recovery", secs(600), &mut || signal_recovery(&mut signal_state));
    check(9, "leakage sentinels", secs(120), &mut leakage_sentinels);
    check(10, "parallel determinism", secs(600), &mut || parallel_determinism(dir.path()));
    check(11, "report fidelity", secs(5), &mut || report_fidelity(&signal_state, dir.path()));
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
