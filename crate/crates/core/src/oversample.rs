//! Minority-class oversampling for the training split: random duplication,
//! SMOTE, Borderline-SMOTE (variant 1) and ADASYN.
//!
//! Output panels keep every input row in its original order and append the
//! new rows. Synthetic rows get the parent's year and industries and a
//! company id of the form `{parent}~dup{n}` or `{parent}~syn{n}`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Instance, Panel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::Standardizer;
use crate::rng::rng_from_seed;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_M: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SamplerKind {
    None,
    Random,
    Smote { k: usize },
    BorderlineSmote { k: usize, m: usize },
    Adasyn { k: usize, beta: f64 },
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::None => "none",
            SamplerKind::Random => "random",
            SamplerKind::Smote { .. } => "smote",
            SamplerKind::BorderlineSmote { .. } => "borderline_smote",
            SamplerKind::Adasyn { .. } => "adasyn",
        }
    }

    /// Whether the sampler measures distances and so needs complete rows.
    pub fn needs_complete_rows(&self) -> bool {
        !matches!(self, SamplerKind::None | SamplerKind::Random)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match *self {
            SamplerKind::Smote { k } | SamplerKind::BorderlineSmote { k, .. } | SamplerKind::Adasyn { k, .. }
                if k == 0 =>
            {
                bad("oversampler k must be at least 1")
            }
            SamplerKind::BorderlineSmote { m: 0, .. } => bad("borderline m must be at least 1"),
            SamplerKind::Adasyn { beta, .. } if !(beta > 0.0 && beta <= 1.0) => bad("adasyn beta must be in (0, 1]"),
            _ => Ok(()),
        }
    }
}

fn check_ratio(target_ratio: f64) -> Result<()> {
    if target_ratio > 0.0 && target_ratio <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("target_ratio must be in (0, 1], got {target_ratio}")))
    }
}

/// Provenance of one appended row. Indices refer to rows of the input panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synthetic {
    pub parent: usize,
    /// Interpolation partner; `None` for plain duplicates.
    pub neighbor: Option<usize>,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct Oversampled {
    pub panel: Panel,
    /// One entry per appended row, in output order.
    pub synthetics: Vec<Synthetic>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BorderlineClass {
    Safe,
    Danger,
    Noise,
}

/// Borderline-SMOTE rule for a minority point whose `m` nearest neighbours
/// include `majority` majority-class points.
pub fn borderline_class(majority: usize, m: usize) -> BorderlineClass {
    if majority == m {
        BorderlineClass::Noise
    } else if 2 * majority >= m {
        BorderlineClass::Danger
    } else {
        BorderlineClass::Safe
    }
}

struct Classes {
    labels: Vec<bool>,
    minority_label: bool,
    minority: Vec<usize>,
    n_majority: usize,
}

impl Classes {
    fn of(panel: &Panel) -> Result<Self> {
        let labels = panel.labels()?;
        let pos = labels.iter().filter(|&&l| l).count();
        let neg = labels.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::invalid("oversampling needs both classes present"));
        }
        let minority_label = pos <= neg;
        let minority = (0..labels.len()).filter(|&i| labels[i] == minority_label).collect();
        Ok(Classes {
            labels,
            minority_label,
            minority,
            n_majority: pos.max(neg),
        })
    }

    fn deficit(&self, target_ratio: f64) -> usize {
        let want = (target_ratio * self.n_majority as f64).round() as usize;
        want.saturating_sub(self.minority.len())
    }
}

/// Dispatch on `kind`. ADASYN ignores `target_ratio`; its volume is set by `beta`.
pub fn oversample(train: &Panel, kind: &SamplerKind, target_ratio: f64, seed: u64) -> Result<Oversampled> {
    kind.validate()?;
    match *kind {
        SamplerKind::None => Ok(Oversampled {
            panel: train.clone(),
            synthetics: Vec::new(),
            warnings: Vec::new(),
        }),
        SamplerKind::Random => oversample_random(train, target_ratio, seed),
        SamplerKind::Smote { k } => oversample_smote(train, k, target_ratio, seed),
        SamplerKind::BorderlineSmote { k, m } => oversample_borderline(train, k, m, target_ratio, seed),
        SamplerKind::Adasyn { k, beta } => oversample_adasyn(train, k, beta, seed),
    }
}

pub fn oversample_random(train: &Panel, target_ratio: f64, seed: u64) -> Result<Oversampled> {
    check_ratio(target_ratio)?;
    let classes = Classes::of(train)?;
    let mut rng = rng_from_seed(seed);
    let synthetics: Vec<Synthetic> = (0..classes.deficit(target_ratio))
        .map(|_| Synthetic {
            parent: classes.minority[rng.random_range(0..classes.minority.len())],
            neighbor: None,
            gap: 0.0,
        })
        .collect();
    assemble(train, None, synthetics, Vec::new())
}

pub fn oversample_smote(train: &Panel, k: usize, target_ratio: f64, seed: u64) -> Result<Oversampled> {
    check_ratio(target_ratio)?;
    let (classes, x, space) = prepare(train, k)?;
    let n_new = classes.deficit(target_ratio);
    let seeds = classes.minority.clone();
    let synthetics = smote_from(&space, &classes.minority, &seeds, k, n_new, seed)?;
    assemble(train, Some(&x), synthetics, Vec::new())
}

pub fn oversample_borderline(train: &Panel, k: usize, m: usize, target_ratio: f64, seed: u64) -> Result<Oversampled> {
    check_ratio(target_ratio)?;
    if m == 0 {
        return Err(Error::Config("borderline m must be at least 1".into()));
    }
    let (classes, x, space) = prepare(train, k)?;
    let m_eff = m.min(space.rows() - 1);
    let all: Vec<usize> = (0..space.rows()).collect();
    let danger: Vec<usize> = classes
        .minority
        .iter()
        .copied()
        .filter(|&i| {
            let majority = nearest(&space, i, &all, m_eff)
                .iter()
                .filter(|&&j| classes.labels[j] != classes.minority_label)
                .count();
            borderline_class(majority, m_eff) == BorderlineClass::Danger
        })
        .collect();
    let mut warnings = Vec::new();
    let seeds = if danger.is_empty() {
        warnings.push("borderline_smote: no DANGER points; fell back to plain SMOTE".to_string());
        classes.minority.clone()
    } else {
        danger
    };
    let n_new = classes.deficit(target_ratio);
    let synthetics = smote_from(&space, &classes.minority, &seeds, k, n_new, seed)?;
    assemble(train, Some(&x), synthetics, warnings)
}

pub fn oversample_adasyn(train: &Panel, k: usize, beta: f64, seed: u64) -> Result<Oversampled> {
    SamplerKind::Adasyn { k, beta }.validate()?;
    let (classes, x, space) = prepare(train, k)?;
    let g_total = (classes.n_majority - classes.minority.len()) as f64 * beta;
    let k_all = k.min(space.rows() - 1);
    let all: Vec<usize> = (0..space.rows()).collect();
    let r: Vec<f64> = classes
        .minority
        .iter()
        .map(|&i| {
            let majority = nearest(&space, i, &all, k_all)
                .iter()
                .filter(|&&j| classes.labels[j] != classes.minority_label)
                .count();
            majority as f64 / k_all as f64
        })
        .collect();
    let r_sum: f64 = r.iter().sum();
    if r_sum == 0.0 {
        let synthetics = smote_from(
            &space,
            &classes.minority,
            &classes.minority,
            k,
            g_total.round() as usize,
            seed,
        )?;
        let warnings = vec!["adasyn: no minority point has majority neighbours; fell back to plain SMOTE".to_string()];
        return assemble(train, Some(&x), synthetics, warnings);
    }
    let k_min = k.min(classes.minority.len() - 1);
    let mut rng = rng_from_seed(seed);
    let mut synthetics = Vec::new();
    for (pos, &i) in classes.minority.iter().enumerate() {
        let g = (r[pos] / r_sum * g_total).round() as usize;
        if g == 0 {
            continue;
        }
        let nn = nearest(&space, i, &classes.minority, k_min);
        for _ in 0..g {
            let partner = nn[rng.random_range(0..nn.len())];
            synthetics.push(Synthetic {
                parent: i,
                neighbor: Some(partner),
                gap: rng.random::<f64>(),
            });
        }
    }
    assemble(train, Some(&x), synthetics, Vec::new())
}

/// Class bookkeeping, the raw feature matrix and the standardized copy used
/// for neighbour search.
fn prepare(train: &Panel, k: usize) -> Result<(Classes, Matrix, Matrix)> {
    if k == 0 {
        return Err(Error::Config("oversampler k must be at least 1".into()));
    }
    let classes = Classes::of(train)?;
    if classes.minority.len() < 2 {
        return Err(Error::invalid("interpolating oversamplers need at least 2 minority rows"));
    }
    let x = train.to_matrix();
    if x.has_missing() {
        return Err(Error::invalid("interpolating oversamplers need complete rows; impute first"));
    }
    let space = Standardizer::fit(&x).transform(&x)?;
    Ok((classes, x, space))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` candidates closest to row `from` (excluding itself), nearest
/// first, ties broken by row index.
fn nearest(space: &Matrix, from: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let origin = space.row(from);
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&j| j != from)
        .map(|&j| (sq_dist(origin, space.row(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.into_iter().map(|(_, j)| j).collect()
}

/// `n_new` interpolations, each from a seed drawn uniformly from `seeds`
/// toward one of its `k` nearest minority neighbours.
fn smote_from(
    space: &Matrix,
    minority: &[usize],
    seeds: &[usize],
    k: usize,
    n_new: usize,
    seed: u64,
) -> Result<Vec<Synthetic>> {
    let k = k.min(minority.len() - 1);
    let mut rng = rng_from_seed(seed);
    let mut cache: std::collections::HashMap<usize, Vec<usize>> = Default::default();
    let mut out = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let parent = seeds[rng.random_range(0..seeds.len())];
        let nn = cache.entry(parent).or_insert_with(|| nearest(space, parent, minority, k));
        let partner = nn[rng.random_range(0..nn.len())];
        out.push(Synthetic {
            parent,
            neighbor: Some(partner),
            gap: rng.random::<f64>(),
        });
    }
    Ok(out)
}

fn assemble(train: &Panel, x: Option<&Matrix>, synthetics: Vec<Synthetic>, warnings: Vec<String>) -> Result<Oversampled> {
    let src = train.rows();
    let mut rows = src.to_vec();
    rows.reserve(synthetics.len());
    for (n, s) in synthetics.iter().enumerate() {
        let p = &src[s.parent];
        let (tag, values) = match (s.neighbor, x) {
            (Some(nb), Some(x)) => {
                let a = x.row(s.parent);
                let b = x.row(nb);
                let v = a.iter().zip(b).map(|(&u, &w)| Some(u + s.gap * (w - u))).collect();
                ("syn", v)
            }
            _ => ("dup", p.values.clone()),
        };
        rows.push(Instance {
            company_id: format!("{}~{tag}{}", p.company_id, n + 1),
            values,
            ..p.clone()
        });
    }
    Ok(Oversampled {
        panel: Panel::new(train.schema_arc(), rows)?,
        synthetics,
        warnings,
    })
}
