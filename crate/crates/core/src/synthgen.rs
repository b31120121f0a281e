//! Synthetic company-year panels with planted signal and controllable
//! missingness.
//!
//! Features follow a three-factor model whose loadings, centers and scales
//! depend on the L3 industry. Labels are Bernoulli draws on
//! `intercept + sum(effect_j * z_j)`, where `z_j` is feature `j` centered and
//! scaled within its industry, and the intercept is solved so the expected
//! positive rate hits the target.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Category, FeatureKind, FeatureSchema, Instance, Panel};
use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::rng::{derive_seed, rng_from_seed, Rng};

const N_FACTORS: usize = 3;
const INDUSTRY_LOADING_SD: f64 = 0.3;
const NOISE_SD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Mcar,
    /// Missingness probability rises with an always-observed driver feature.
    Mar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub feature: String,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_years: usize,
    pub first_year: i32,
    pub n_industries_l2: usize,
    pub n_industries_l3_per_l2: usize,
    pub positive_rate: f64,
    pub signal: Vec<Signal>,
    pub missing_rates: BTreeMap<Category, f64>,
    pub mechanism: Mechanism,
    /// Driver for [`Mechanism::Mar`]; defaults to the first feature.
    pub mar_driver: Option<String>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let missing_rates = [
            (Category::Governance, 0.10),
            (Category::Ownership, 0.15),
            (Category::Technical, 0.05),
            (Category::Return, 0.10),
            (Category::Valuation, 0.25),
            (Category::Operation, 0.30),
        ]
        .into_iter()
        .collect();
        SynthSpec {
            n_rows: 20_000,
            n_years: 5,
            first_year: 2015,
            n_industries_l2: 4,
            n_industries_l3_per_l2: 3,
            positive_rate: 0.034,
            signal: vec![
                Signal { feature: "free_float_pct".into(), effect: 1.2 },
                Signal { feature: "total_return_1y".into(), effect: -1.0 },
                Signal { feature: "tobins_q".into(), effect: -0.9 },
            ],
            missing_rates,
            mechanism: Mechanism::Mcar,
            mar_driver: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Same layout with every effect set to zero.
    pub fn null(&self) -> Self {
        let mut s = self.clone();
        for sig in &mut s.signal {
            sig.effect = 0.0;
        }
        s
    }

    /// Same layout with no missing cells.
    pub fn complete(&self) -> Self {
        let mut s = self.clone();
        s.missing_rates.values_mut().for_each(|r| *r = 0.0);
        s
    }

    pub fn with_uniform_missing(mut self, rate: f64) -> Self {
        self.missing_rates = Category::ALL.iter().map(|&c| (c, rate)).collect();
        self
    }

    /// Reads a TOML spec; omitted keys keep their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_rows == 0 || self.n_years == 0 {
            return bad("n_rows and n_years must be positive".into());
        }
        if self.n_industries_l2 == 0 || self.n_industries_l3_per_l2 == 0 {
            return bad("industry counts must be positive".into());
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad(format!("positive_rate must be in (0, 1), got {}", self.positive_rate));
        }
        for (c, r) in &self.missing_rates {
            if !(0.0..=1.0).contains(r) {
                return bad(format!("missing rate for {c} must be in [0, 1], got {r}"));
            }
        }
        for s in &self.signal {
            if schema.index_of(&s.feature).is_none() {
                return bad(format!("signal feature `{}` is not in the schema", s.feature));
            }
            if !s.effect.is_finite() {
                return bad(format!("signal effect for `{}` is not finite", s.feature));
            }
        }
        if let Some(d) = &self.mar_driver {
            if schema.index_of(d).is_none() {
                return bad(format!("MAR driver `{d}` is not in the schema"));
            }
        }
        Ok(())
    }
}

/// Everything needed to score imputations and recompute labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub intercept: f64,
    /// Effect per schema feature (zero for non-signal features).
    pub coefficients: Vec<f64>,
    /// Per-L3 feature centers and scales defining `z_j`.
    pub centers: BTreeMap<String, Vec<f64>>,
    pub scales: BTreeMap<String, Vec<f64>>,
    /// Uniform draw per row; a row is positive when it falls below the
    /// label probability.
    pub label_draws: Vec<f64>,
    pub realized_positive_rate: f64,
    /// The panel before masking.
    #[serde(skip)]
    pub complete: Option<Panel>,
}

impl GroundTruth {
    /// Indices of the planted features, in schema order.
    pub fn signal_indices(&self) -> Vec<usize> {
        (0..self.coefficients.len()).filter(|&j| self.coefficients[j] != 0.0).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Labels implied by the stored draws for a complete panel with the
    /// generated layout.
    pub fn recompute_labels(&self, complete: &Panel) -> Result<Vec<bool>> {
        if complete.len() != self.label_draws.len() {
            return Err(Error::invalid("panel does not match the ground truth row count"));
        }
        let logits = self.logits(complete)?;
        Ok(logits
            .iter()
            .zip(&self.label_draws)
            .map(|(&l, &u)| u < sigmoid(self.intercept + l))
            .collect())
    }

    fn logits(&self, panel: &Panel) -> Result<Vec<f64>> {
        panel
            .rows()
            .iter()
            .map(|r| {
                let c = self.centers.get(&r.industry_l3);
                let s = self.scales.get(&r.industry_l3);
                let (c, s) = c.zip(s).ok_or_else(|| Error::invalid(format!("unknown industry `{}`", r.industry_l3)))?;
                let mut acc = 0.0;
                for (j, &b) in self.coefficients.iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    let v = r.values[j].ok_or_else(|| Error::invalid("complete panel has a missing cell"))?;
                    acc += b * (v - c[j]) / s[j];
                }
                Ok(acc)
            })
            .collect()
    }
}

struct Industry {
    l2: String,
    l3: String,
    loadings: Vec<[f64; N_FACTORS]>,
    centers: Vec<f64>,
    scales: Vec<f64>,
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn industries(spec: &SynthSpec, schema: &FeatureSchema, rng: &mut Rng) -> Vec<Industry> {
    let d = schema.len();
    let global: Vec<[f64; N_FACTORS]> = (0..d).map(|_| std::array::from_fn(|_| normal(rng))).collect();
    let mut out = Vec::new();
    for a in 0..spec.n_industries_l2 {
        for b in 0..spec.n_industries_l3_per_l2 {
            let loadings: Vec<[f64; N_FACTORS]> = global
                .iter()
                .map(|g| std::array::from_fn(|k| g[k] + INDUSTRY_LOADING_SD * normal(rng)))
                .collect();
            let mut centers = Vec::with_capacity(d);
            let mut scales = Vec::with_capacity(d);
            for f in schema.features() {
                if f.kind == FeatureKind::Binary {
                    centers.push(0.5);
                    scales.push(0.5);
                } else {
                    centers.push(2.0 * normal(rng));
                    scales.push((0.3 * normal(rng)).exp());
                }
            }
            out.push(Industry {
                l2: format!("L2_{:02}", a + 1),
                l3: format!("L3_{:02}_{:02}", a + 1, b + 1),
                loadings,
                centers,
                scales,
            });
        }
    }
    out
}

/// Intercept `a` with `mean(sigmoid(a + s_i)) = target`, by bisection.
fn solve_intercept(scores: &[f64], target: f64) -> Result<f64> {
    let rate = |a: f64| scores.iter().map(|&s| sigmoid(a + s)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    if rate(lo) > target || rate(hi) < target {
        return Err(Error::Config(format!("positive rate {target} is not attainable")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Generate a labeled panel (with missing cells) and its ground truth.
pub fn generate(spec: &SynthSpec, schema: Arc<FeatureSchema>) -> Result<(Panel, GroundTruth)> {
    spec.validate(&schema)?;
    let d = schema.len();
    let mut layout_rng = rng_from_seed(derive_seed(spec.seed, "industries"));
    let inds = industries(spec, &schema, &mut layout_rng);

    let mut rng = rng_from_seed(derive_seed(spec.seed, "rows"));
    let n_companies = spec.n_rows.div_ceil(spec.n_years);
    let mut rows = Vec::with_capacity(spec.n_rows);
    'outer: for c in 0..n_companies {
        let ind = &inds[rng.random_range(0..inds.len())];
        for y in 0..spec.n_years {
            if rows.len() == spec.n_rows {
                break 'outer;
            }
            let f: [f64; N_FACTORS] = std::array::from_fn(|_| normal(&mut rng));
            let values = (0..d)
                .map(|j| {
                    let l = &ind.loadings[j];
                    let raw = (0..N_FACTORS).map(|k| l[k] * f[k]).sum::<f64>() + NOISE_SD * normal(&mut rng);
                    let norm = (l.iter().map(|v| v * v).sum::<f64>() + NOISE_SD * NOISE_SD).sqrt();
                    let z = raw / norm;
                    Some(match schema.feature(j).kind {
                        FeatureKind::Binary => f64::from(u8::from(z > 0.0)),
                        FeatureKind::Continuous => ind.centers[j] + ind.scales[j] * z,
                    })
                })
                .collect();
            rows.push(Instance {
                company_id: format!("C{:05}", c + 1),
                year: spec.first_year + y as i32,
                industry_l2: ind.l2.clone(),
                industry_l3: ind.l3.clone(),
                values,
                label: None,
            });
        }
    }

    let mut coefficients = vec![0.0; d];
    for s in &spec.signal {
        coefficients[schema.index_of(&s.feature).expect("validated")] += s.effect;
    }
    let mut truth = GroundTruth {
        spec: spec.clone(),
        intercept: 0.0,
        coefficients,
        centers: inds.iter().map(|i| (i.l3.clone(), i.centers.clone())).collect(),
        scales: inds.iter().map(|i| (i.l3.clone(), i.scales.clone())).collect(),
        label_draws: Vec::new(),
        realized_positive_rate: 0.0,
        complete: None,
    };
    let unlabeled = Panel::new(Arc::clone(&schema), rows)?;
    let logits = truth.logits(&unlabeled)?;
    truth.intercept = solve_intercept(&logits, spec.positive_rate)?;
    let mut label_rng = rng_from_seed(derive_seed(spec.seed, "labels"));
    truth.label_draws = (0..unlabeled.len()).map(|_| label_rng.random::<f64>()).collect();
    let labels = truth.recompute_labels(&unlabeled)?;
    truth.realized_positive_rate = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;

    let mut rows = unlabeled.into_rows();
    for (r, l) in rows.iter_mut().zip(&labels) {
        r.label = Some(*l);
    }
    let complete = Panel::new(Arc::clone(&schema), rows)?;
    let masked = apply_missingness(spec, &complete)?;
    truth.complete = Some(complete);
    Ok((masked, truth))
}

fn apply_missingness(spec: &SynthSpec, complete: &Panel) -> Result<Panel> {
    let schema = complete.schema();
    let driver = match spec.mechanism {
        Mechanism::Mcar => None,
        Mechanism::Mar => Some(match &spec.mar_driver {
            Some(n) => schema.index_of(n).expect("validated"),
            None => 0,
        }),
    };
    // MAR weights 2*sigmoid(1.5 z) average to one over a symmetric driver,
    // so the marginal rate stays close to the configured one
    let weights: Vec<f64> = match driver {
        None => vec![1.0; complete.len()],
        Some(j) => {
            let col: Vec<f64> = complete.rows().iter().map(|r| r.values[j].unwrap()).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt().max(1e-12);
            col.iter().map(|v| 2.0 * sigmoid(1.5 * (v - mean) / sd)).collect()
        }
    };
    let rates: Vec<f64> = schema
        .features()
        .iter()
        .map(|f| spec.missing_rates.get(&f.category).copied().unwrap_or(0.0))
        .collect();
    let mut rng = rng_from_seed(derive_seed(spec.seed, "missingness"));
    let mut rows = complete.rows().to_vec();
    for (r, w) in rows.iter_mut().zip(&weights) {
        for (j, v) in r.values.iter_mut().enumerate() {
            let u = rng.random::<f64>();
            if Some(j) != driver && u < (rates[j] * w).min(1.0) {
                *v = None;
            }
        }
    }
    Panel::new(complete.schema_arc(), rows)
}
