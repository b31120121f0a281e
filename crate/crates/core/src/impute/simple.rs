use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Median,
}

/// Median of the observed values; `None` when nothing is observed.
pub fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values
        .filter(|x| !x.is_nan())
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Per-column statistic over observed cells.
pub fn column_statistics(m: &Matrix, stat: Statistic) -> Vec<Option<f64>> {
    (0..m.cols())
        .map(|j| {
            let col = (0..m.rows()).map(|i| m.get(i, j));
            match stat {
                Statistic::Mean => mean(col),
                Statistic::Median => median(col),
            }
        })
        .collect()
}

/// Fill `NaN` cells with the given column values (`None` fills 0). Returns the
/// indices of columns that needed a fill but had no statistic.
pub fn fill_columns(m: &mut Matrix, fills: &[Option<f64>]) -> Vec<usize> {
    let mut flagged = Vec::new();
    for j in 0..m.cols() {
        let mut needed = false;
        let v = fills[j].unwrap_or(0.0);
        for i in 0..m.rows() {
            if m.get(i, j).is_nan() {
                m.set(i, j, v);
                needed = true;
            }
        }
        if needed && fills[j].is_none() {
            flagged.push(j);
        }
    }
    flagged
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_mean() {
        assert_eq!(median([1.0, f64::NAN, 3.0, 100.0].into_iter()), Some(3.0));
        assert_eq!(median([1.0, 2.0, 3.0, 10.0].into_iter()), Some(2.5));
        assert_eq!(mean([1.0, f64::NAN, 3.0].into_iter()), Some(2.0));
        assert_eq!(median([f64::NAN].into_iter()), None);
    }

    #[test]
    fn fill_flags_fully_missing_columns() {
        let mut m = Matrix::from_rows(&[[1.0, f64::NAN], [f64::NAN, f64::NAN]]);
        let stats = column_statistics(&m, Statistic::Mean);
        let flagged = fill_columns(&mut m, &stats);
        assert_eq!(flagged, vec![1]);
        assert_eq!(m.row(1), &[1.0, 0.0]);
    }
}
