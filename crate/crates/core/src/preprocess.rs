//! Industry-relative percentile ranks, standardization and year indicators.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Instance, Panel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Minimum (L3, year) group size for ranking at L3; smaller groups fall back to L2.
pub const L3_MIN_GROUP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndustryLevel {
    L2,
    L3,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupKey {
    pub industry_code: String,
    pub level: IndustryLevel,
    pub year: i32,
}

/// Peer group of each row: (L3, year) when that group holds at least
/// [`L3_MIN_GROUP`] rows, otherwise (L2, year).
pub fn peer_groups(panel: &Panel) -> Vec<GroupKey> {
    let mut l3_sizes: HashMap<(&str, i32), usize> = HashMap::new();
    for r in panel.rows() {
        *l3_sizes.entry((r.industry_l3.as_str(), r.year)).or_default() += 1;
    }
    panel
        .rows()
        .iter()
        .map(|r| {
            if l3_sizes[&(r.industry_l3.as_str(), r.year)] >= L3_MIN_GROUP {
                GroupKey {
                    industry_code: r.industry_l3.clone(),
                    level: IndustryLevel::L3,
                    year: r.year,
                }
            } else {
                GroupKey {
                    industry_code: r.industry_l2.clone(),
                    level: IndustryLevel::L2,
                    year: r.year,
                }
            }
        })
        .collect()
}

/// `(rank - 0.5) / n` with average ranks for ties. `NaN` entries are skipped
/// and stay `NaN`.
pub fn percentile_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| !values[i].is_nan()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let n = idx.len() as f64;
    let mut out = vec![f64::NAN; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their average
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let p = (avg_rank - 0.5) / n;
        for &i in &idx[start..end] {
            out[i] = p;
        }
        start = end;
    }
    out
}

/// Replace every peer-relative feature value with its percentile inside the
/// row's peer group (see [`peer_groups`]). Rows falling back to L2 are ranked
/// among all rows of their (L2, year). Missing values stay missing.
pub fn percentile_transform(panel: &Panel) -> Panel {
    let groups = peer_groups(panel);
    let transformed: Vec<usize> = panel
        .schema()
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.percentile_transformed)
        .map(|(j, _)| j)
        .collect();

    let mut members: HashMap<GroupKey, Vec<usize>> = HashMap::new();
    for (i, r) in panel.rows().iter().enumerate() {
        members
            .entry(GroupKey {
                industry_code: r.industry_l2.clone(),
                level: IndustryLevel::L2,
                year: r.year,
            })
            .or_default()
            .push(i);
        members
            .entry(GroupKey {
                industry_code: r.industry_l3.clone(),
                level: IndustryLevel::L3,
                year: r.year,
            })
            .or_default()
            .push(i);
    }

    let mut rows: Vec<Instance> = panel.rows().to_vec();
    let mut needed: Vec<&GroupKey> = groups.iter().collect();
    needed.sort_by(|a, b| {
        (a.year, &a.industry_code, a.level as u8).cmp(&(b.year, &b.industry_code, b.level as u8))
    });
    needed.dedup();
    for key in needed {
        let idx = &members[key];
        for &j in &transformed {
            let vals: Vec<f64> = idx
                .iter()
                .map(|&i| panel.rows()[i].values[j].unwrap_or(f64::NAN))
                .collect();
            let ranks = percentile_ranks(&vals);
            for (&i, p) in idx.iter().zip(ranks) {
                if &groups[i] == key && !p.is_nan() {
                    rows[i].values[j] = Some(p);
                }
            }
        }
    }
    Panel::from_parts_unchecked(panel.schema_arc(), rows)
}

/// Per-feature z-scoring fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; 0 marks a constant column.
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Statistics over observed (non-`NaN`) cells. A fully missing column gets
    /// mean 0 and stddev 0.
    pub fn fit(m: &Matrix) -> Self {
        let d = m.cols();
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        for j in 0..d {
            let col: Vec<f64> = (0..m.rows()).map(|i| m.get(i, j)).filter(|v| !v.is_nan()).collect();
            if col.is_empty() {
                continue;
            }
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            means[j] = mean;
            let sd = var.sqrt();
            // treat round-off-level spread as constant
            stds[j] = if sd <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { sd };
        }
        Standardizer { means, stds }
    }

    pub fn fit_panel(panel: &Panel) -> Self {
        Self::fit(&panel.to_matrix())
    }

    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                if v.is_nan() {
                    continue;
                }
                *v = if self.stds[j] == 0.0 {
                    0.0
                } else {
                    (*v - self.means[j]) / self.stds[j]
                };
            }
        }
        Ok(out)
    }

    /// Inverse of [`transform`](Self::transform); constant columns map back to their mean.
    pub fn inverse_transform(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                if !v.is_nan() {
                    *v = *v * self.stds[j] + self.means[j];
                }
            }
        }
        Ok(out)
    }

    pub fn transform_panel(&self, panel: &Panel) -> Result<Panel> {
        panel.with_matrix(&self.transform(&panel.to_matrix())?)
    }

    fn check(&self, m: &Matrix) -> Result<()> {
        if m.cols() != self.means.len() {
            return Err(Error::invalid(format!(
                "standardizer fitted on {} columns, got {}",
                self.means.len(),
                m.cols()
            )));
        }
        Ok(())
    }
}

pub fn fit_standardizer(panel: &Panel) -> Standardizer {
    Standardizer::fit_panel(panel)
}

pub fn apply_standardizer(std: &Standardizer, panel: &Panel) -> Result<Panel> {
    std.transform_panel(panel)
}

/// Year indicator columns, one per distinct year in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct YearOneHot {
    pub years: Vec<i32>,
    pub matrix: Matrix,
}

pub fn one_hot_years(panel: &Panel) -> Result<YearOneHot> {
    if panel.is_empty() {
        return Err(Error::invalid("cannot one-hot encode an empty panel"));
    }
    let years = panel.distinct_years();
    let mut m = Matrix::zeros(panel.len(), years.len());
    for (i, r) in panel.rows().iter().enumerate() {
        let j = years.binary_search(&r.year).expect("year present");
        m.set(i, j, 1.0);
    }
    Ok(YearOneHot { years, matrix: m })
}
