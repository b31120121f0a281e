use std::sync::Arc;

use activist_core::data::*;
use activist_core::impute::*;
use activist_core::matrix::Matrix;
use activist_core::nn::relative_error;
use activist_core::rng::rng_from_seed;
use activist_core::synthgen::{generate, SynthSpec};
use proptest::prelude::*;
use rand::Rng;

fn holey(n: usize, d: usize, rate: f64, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        let base: f64 = rng.random_range(-1.0..1.0);
        for j in 0..d {
            let v = if rng.random_bool(rate) { f64::NAN } else { base * (j as f64 + 1.0) + rng.random_range(-0.3..0.3) };
            m.set(i, j, v);
        }
    }
    m
}

/// Independent KNN: standardize, full sort of all other rows by partial
/// distance, take the first k that observe the column.
fn knn_oracle(m: &Matrix, k: usize) -> Matrix {
    let (n, d) = (m.rows(), m.cols());
    let mut z = m.clone();
    for j in 0..d {
        let obs: Vec<f64> = (0..n).map(|i| m.get(i, j)).filter(|v| !v.is_nan()).collect();
        let mu = obs.iter().sum::<f64>() / obs.len() as f64;
        let sd = (obs.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / obs.len() as f64).sqrt();
        for i in 0..n {
            if !m.get(i, j).is_nan() {
                z.set(i, j, if sd > 0.0 { (m.get(i, j) - mu) / sd } else { 0.0 });
            }
        }
    }
    let mut out = m.clone();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&r| r != i)
            .filter_map(|r| {
                let shared: Vec<usize> = (0..d).filter(|&j| !z.get(i, j).is_nan() && !z.get(r, j).is_nan()).collect();
                if shared.is_empty() {
                    return None;
                }
                let s: f64 = shared.iter().map(|&j| (z.get(i, j) - z.get(r, j)).powi(2)).sum();
                Some((s * d as f64 / shared.len() as f64, r))
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for j in 0..d {
            if m.get(i, j).is_nan() {
                let donors: Vec<f64> =
                    others.iter().map(|&(_, r)| m.get(r, j)).filter(|v| !v.is_nan()).take(k).collect();
                assert!(!donors.is_empty(), "oracle inputs always have donors");
                out.set(i, j, donors.iter().sum::<f64>() / donors.len() as f64);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn knn_matches_exhaustive_oracle(seed in any::<u64>(), k in 1usize..6) {
        let m = holey(25, 4, 0.2, seed);
        // every column keeps some observed value so the oracle always has donors
        prop_assume!((0..4).all(|j| (0..25).filter(|&i| !m.get(i, j).is_nan()).count() > k));
        prop_assume!((0..25).all(|i| (0..4).any(|j| !m.get(i, j).is_nan())));
        let got = knn_impute_block(&m, 4, k);
        let want = knn_oracle(&m, k);
        for (a, b) in got.as_slice().iter().zip(want.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn gain_gradients_match_finite_differences(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let (n, d, h) = (6, 3, 4);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let mask: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| if rng.random_bool(0.7) { 1.0 } else { 0.0 }).collect()).collect();
        let x: Vec<Vec<f64>> = x.iter().zip(&mask).map(|(r, m)| r.iter().zip(m).map(|(v, k)| v * k).collect()).collect();
        let batch = GainBatch::draw(&x, &mask, 0.5, &mut rng);
        let gen = Net::init(d, h, &mut rng);
        let mut disc = Net::init(d, h, &mut rng);
        for p in disc.params.iter_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        let (_, gd) = discriminator_loss(&gen, &disc, &batch);
        let (_, gg) = generator_loss(&gen, &disc, &batch, 10.0);
        let eps = 1e-6;
        for j in 0..disc.params.len() {
            let mut a = disc.clone();
            let mut b = disc.clone();
            a.params[j] += eps;
            b.params[j] -= eps;
            let fd = (discriminator_loss(&gen, &a, &batch).0 - discriminator_loss(&gen, &b, &batch).0) / (2.0 * eps);
            prop_assert!(relative_error(gd[j], fd) <= 1e-4 || (gd[j] - fd).abs() < 1e-8, "D {j}: {} vs {fd}", gd[j]);
        }
        for j in 0..gen.params.len() {
            let mut a = gen.clone();
            let mut b = gen.clone();
            a.params[j] += eps;
            b.params[j] -= eps;
            let fd = (generator_loss(&a, &disc, &batch, 10.0).0 - generator_loss(&b, &disc, &batch, 10.0).0) / (2.0 * eps);
            prop_assert!(relative_error(gg[j], fd) <= 1e-4 || (gg[j] - fd).abs() < 1e-8, "G {j}: {} vs {fd}", gg[j]);
        }
    }
}

fn small_panel(rows: Vec<(i32, Vec<Option<f64>>)>) -> Panel {
    let schema = Arc::new(FeatureSchema::generic(rows[0].1.len(), Category::Valuation));
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, (year, values))| Instance {
            company_id: format!("c{i}"),
            year,
            industry_l2: "a".into(),
            industry_l3: "a1".into(),
            values,
            label: Some(i % 2 == 0),
        })
        .collect();
    Panel::new(schema, rows).unwrap()
}

#[test]
fn test_rows_receive_training_medians() {
    let train = small_panel(vec![
        (2020, vec![Some(1.0), Some(10.0)]),
        (2020, vec![Some(2.0), None]),
        (2021, vec![Some(9.0), Some(30.0)]),
    ]);
    let test = small_panel(vec![(2020, vec![None, None]), (2021, vec![Some(-5.0), None])]);
    let plan = ImputationPlan::by_category(train.schema());
    for kind in [ImputerKind::Mean, ImputerKind::Knn { k: 1 }] {
        let (tr, te) = impute_dispatch(&train, &test, &kind, &plan, 0).unwrap();
        assert_eq!(te.panel.rows()[0].values, vec![Some(2.0), Some(20.0)]);
        assert_eq!(te.panel.rows()[1].values, vec![Some(-5.0), Some(20.0)]);
        assert_eq!(tr.panel.missing_count(), 0);
    }
}

#[test]
fn training_imputation_ignores_test_values() {
    let (panel, _) = generate(&SynthSpec { n_rows: 400, ..SynthSpec::default() }, Arc::new(FeatureSchema::canonical())).unwrap();
    let split = stratified_split(&panel, 0.8, 1).unwrap();
    let mut perturbed = split.test.to_matrix();
    for i in 0..perturbed.rows() {
        for j in 0..perturbed.cols() {
            perturbed.set(i, j, perturbed.get(i, j) * 3.0 + 1.0);
        }
    }
    let other_test = split.test.with_matrix(&perturbed).unwrap();
    let plan = ImputationPlan::by_category(panel.schema());
    let kind = ImputerKind::Knn { k: 5 };
    let a = impute_dispatch(&split.train, &split.test, &kind, &plan, 3).unwrap();
    let b = impute_dispatch(&split.train, &other_test, &kind, &plan, 3).unwrap();
    assert_eq!(a.0.panel, b.0.panel);
}

#[test]
fn observed_cells_are_never_changed() {
    let spec = SynthSpec { n_rows: 300, ..SynthSpec::default() };
    let (panel, _) = generate(&spec, Arc::new(FeatureSchema::canonical())).unwrap();
    let plan = ImputationPlan::by_category(panel.schema());
    let kinds = [
        ImputerKind::Mean,
        ImputerKind::Median,
        ImputerKind::Knn { k: 3 },
        ImputerKind::Mice(MiceParams { iterations: 1, ..MiceParams::default() }),
        ImputerKind::Gain(GainConfig { steps: 50, ..GainConfig::default() }),
    ];
    let before = panel.to_matrix();
    for kind in kinds {
        let out = impute_train(&panel, &kind, &plan, 0).unwrap();
        let after = out.panel.to_matrix();
        assert!(!after.has_missing(), "{}", kind.name());
        for (a, b) in before.as_slice().iter().zip(after.as_slice()) {
            if !a.is_nan() {
                assert_eq!(a, b, "{}", kind.name());
            }
        }
    }
}

#[test]
fn gain_is_reproducible_per_seed() {
    let spec = SynthSpec { n_rows: 200, ..SynthSpec::default() };
    let (panel, _) = generate(&spec, Arc::new(FeatureSchema::canonical())).unwrap();
    let plan = ImputationPlan::by_category(panel.schema());
    let kind = ImputerKind::Gain(GainConfig { steps: 30, ..GainConfig::default() });
    let a = impute_train(&panel, &kind, &plan, 5).unwrap();
    let b = impute_train(&panel, &kind, &plan, 5).unwrap();
    let c = impute_train(&panel, &kind, &plan, 6).unwrap();
    assert_eq!(a.panel, b.panel);
    assert_ne!(a.panel, c.panel);
}

#[test]
fn gain_learns_identity_pair() {
    let mut rng = rng_from_seed(5);
    let truth: Vec<[f64; 2]> = (0..2000)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            [x, x]
        })
        .collect();
    let mut rows = truth.clone();
    for r in rows.iter_mut() {
        if rng.random_bool(0.2) {
            r[rng.random_range(0..2)] = f64::NAN;
        }
    }
    let m = Matrix::from_rows(&rows);
    let out = GainModel::train(&m, &GainConfig::default()).unwrap().impute(&m).unwrap();
    let col_mean = |j: usize| {
        let v: Vec<f64> = rows.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let means = [col_mean(0), col_mean(1)];
    let (mut gain_sse, mut mean_sse) = (0.0, 0.0);
    for (i, (r, t)) in rows.iter().zip(&truth).enumerate() {
        for j in 0..2 {
            if r[j].is_nan() {
                gain_sse += (out.get(i, j) - t[j]).powi(2);
                mean_sse += (means[j] - t[j]).powi(2);
            }
        }
    }
    assert!(gain_sse < 0.5 * mean_sse, "gain {gain_sse} vs mean {mean_sse}");
}

#[test]
fn fully_missing_column_is_zero_filled_with_warning() {
    let p = small_panel(vec![(2020, vec![Some(1.0), None]), (2020, vec![Some(2.0), None]), (2021, vec![None, None])]);
    let plan = ImputationPlan::by_category(p.schema());
    let out = impute_knn(&p, 2, &plan).unwrap();
    assert_eq!(out.panel.rows()[2].values[1], Some(0.0));
    assert_eq!(out.warnings.len(), 1);
}

#[test]
fn model_based_imputers_beat_the_mean_on_correlated_data() {
    let spec = SynthSpec { n_rows: 1500, seed: 4, ..SynthSpec::default() }.with_uniform_missing(0.2);
    let (panel, truth) = generate(&spec, Arc::new(FeatureSchema::canonical())).unwrap();
    let complete = truth.complete.expect("generator keeps the complete panel").to_matrix();
    let plan = ImputationPlan::by_category(panel.schema());
    let rmse = |kind: &ImputerKind| {
        let out = impute_train(&panel, kind, &plan, 0).unwrap();
        masked_cell_rmse(&panel, &out.panel, &complete)
    };
    let mean = rmse(&ImputerKind::Mean);
    let knn = rmse(&ImputerKind::Knn { k: 5 });
    let mice = rmse(&ImputerKind::Mice(MiceParams::default()));
    assert!(knn < mean, "knn {knn} vs mean {mean}");
    assert!(mice < mean, "mice {mice} vs mean {mean}");
}
