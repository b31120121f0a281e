//! Nearest-neighbour imputation with distances over mutually observed columns.

use rayon::prelude::*;

use crate::impute::simple::median;
use crate::matrix::Matrix;

/// Z-score columns by their observed mean and (population) stddev; constant
/// columns become 0. `NaN` stays `NaN`.
fn zscore(m: &Matrix) -> Matrix {
    let mut z = m.clone();
    for j in 0..m.cols() {
        let obs: Vec<f64> = (0..m.rows()).map(|i| m.get(i, j)).filter(|v| !v.is_nan()).collect();
        if obs.is_empty() {
            continue;
        }
        let n = obs.len() as f64;
        let mu = obs.iter().sum::<f64>() / n;
        let sd = (obs.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
        for i in 0..m.rows() {
            let v = m.get(i, j);
            if !v.is_nan() {
                z.set(i, j, if sd > 0.0 { (v - mu) / sd } else { 0.0 });
            }
        }
    }
    z
}

/// Squared partial distance: sum of squared differences over columns observed
/// in both rows, scaled by `width / observed`. `None` when no column is shared.
pub fn partial_sq_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut s = 0.0;
    let mut cnt = 0usize;
    for (x, y) in a.iter().zip(b) {
        if !x.is_nan() && !y.is_nan() {
            s += (x - y) * (x - y);
            cnt += 1;
        }
    }
    (cnt > 0).then(|| s * a.len() as f64 / cnt as f64)
}

/// Impute the first `n_targets` columns of `m`; remaining columns are
/// auxiliary predictors. Each missing cell becomes the plain mean of that
/// column over the `k` nearest rows (ties broken by row index) that observe
/// it, or the column median when no row does.
pub fn knn_impute_block(m: &Matrix, n_targets: usize, k: usize) -> Matrix {
    let z = zscore(m);
    let medians: Vec<Option<f64>> = (0..n_targets)
        .map(|j| median((0..m.rows()).map(|i| m.get(i, j))))
        .collect();
    let n = m.rows();
    let filled_rows: Vec<(usize, Vec<(usize, f64)>)> = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let missing: Vec<usize> = (0..n_targets).filter(|&j| m.get(i, j).is_nan()).collect();
            if missing.is_empty() {
                return None;
            }
            let zi = z.row(i);
            let dist: Vec<Option<f64>> = (0..n)
                .map(|r| if r == i { None } else { partial_sq_distance(zi, z.row(r)) })
                .collect();
            let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
            let fills = missing
                .into_iter()
                .map(|j| {
                    cand.clear();
                    cand.extend((0..n).filter_map(|r| {
                        let d = dist[r]?;
                        (!m.get(r, j).is_nan()).then_some((d, r))
                    }));
                    let v = if cand.is_empty() {
                        medians[j].unwrap_or(0.0)
                    } else {
                        let kk = k.min(cand.len());
                        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                        if kk < cand.len() {
                            cand.select_nth_unstable_by(kk - 1, by);
                        }
                        cand[..kk].iter().map(|&(_, r)| m.get(r, j)).sum::<f64>() / kk as f64
                    };
                    (j, v)
                })
                .collect();
            Some((i, fills))
        })
        .collect();
    let mut out = m.select_cols(&(0..n_targets).collect::<Vec<_>>());
    for (i, fills) in filled_rows {
        for (j, v) in fills {
            out.set(i, j, v);
        }
    }
    // only reachable when a column is entirely missing
    for j in 0..n_targets {
        for i in 0..n {
            if out.get(i, j).is_nan() {
                out.set(i, j, medians[j].unwrap_or(0.0));
            }
        }
    }
    out
}
