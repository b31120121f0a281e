//! Second-order gradient boosting with exact greedy splits and learned
//! default directions for missing values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::tree::{midpoint, Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum training rows per leaf.
    pub min_leaf: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_leaf: 1,
            lambda: 1.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::Config("gbdt depth and min_leaf must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Config(
                "gbdt learning_rate must be positive and lambda non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Binary log-loss on margins.
    Logistic,
    /// Squared error, used for regression inside chained-equation imputation.
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub objective: Objective,
    pub base_margin: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }

    fn plus(self, o: Stats) -> Stats {
        Stats {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }

    fn score(self, lambda: f64) -> f64 {
        self.g * self.g / (self.h + lambda)
    }
}

/// Split gain `0.5 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)]`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
        - (gl + gr).powi(2) / (hl + hr + lambda))
}

/// Optimal leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
}

struct Frontier {
    node: usize,
    stats: Stats,
    best: Option<Candidate>,
}

/// Per-feature row orderings by value, missing rows excluded.
fn presort(x: &Matrix) -> Vec<Vec<u32>> {
    (0..x.cols())
        .map(|j| {
            let mut idx: Vec<u32> = (0..x.rows() as u32)
                .filter(|&i| !x.get(i as usize, j).is_nan())
                .collect();
            idx.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)));
            idx
        })
        .collect()
}

const INACTIVE: u32 = u32::MAX;

/// Grow one tree level by level. Returns the tree and the leaf value reached
/// by every training row.
fn grow_tree(
    x: &Matrix,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    p: &GbdtParams,
) -> (Tree, Vec<f64>) {
    let n = x.rows();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // frontier slot per row, or INACTIVE once the row sits in a final leaf
    let mut slot_of_row = vec![0u32; n];
    let mut root = Stats::default();
    for i in 0..n {
        root.add(grad[i], hess[i]);
    }
    let mut frontier = vec![Frontier {
        node: 0,
        stats: root,
        best: None,
    }];
    let mut leaf_of_row = vec![0usize; n];

    for _depth in 0..p.max_depth {
        if frontier.is_empty() {
            break;
        }
        let k = frontier.len();
        let splittable: Vec<bool> = frontier.iter().map(|f| f.stats.n >= 2 * p.min_leaf).collect();
        let mut observed = vec![Stats::default(); k];
        let mut running = vec![Stats::default(); k];
        let mut last = vec![f64::NAN; k];
        for (j, order) in sorted.iter().enumerate() {
            observed.iter_mut().for_each(|s| *s = Stats::default());
            for &r in order {
                let s = slot_of_row[r as usize];
                if s != INACTIVE {
                    observed[s as usize].add(grad[r as usize], hess[r as usize]);
                }
            }
            running.iter_mut().for_each(|s| *s = Stats::default());
            last.iter_mut().for_each(|v| *v = f64::NAN);
            for &r in order {
                let r = r as usize;
                let s = slot_of_row[r];
                if s == INACTIVE || !splittable[s as usize] {
                    continue;
                }
                let s = s as usize;
                let v = x.get(r, j);
                if running[s].n > 0 && v > last[s] {
                    let fr = &mut frontier[s];
                    let total = fr.stats;
                    let missing = total.minus(observed[s]);
                    let left_obs = running[s];
                    let right_obs = observed[s].minus(left_obs);
                    let options: &[bool] = if missing.n > 0 { &[false, true] } else { &[false] };
                    for &miss_left in options {
                        let (l, r_) = if miss_left {
                            (left_obs.plus(missing), right_obs)
                        } else {
                            (left_obs, right_obs.plus(missing))
                        };
                        if l.n < p.min_leaf || r_.n < p.min_leaf {
                            continue;
                        }
                        let gain = 0.5
                            * (l.score(p.lambda) + r_.score(p.lambda) - total.score(p.lambda));
                        if gain > 0.0 && fr.best.is_none_or(|b| gain > b.gain) {
                            let default_left = if missing.n > 0 {
                                miss_left
                            } else {
                                l.n >= r_.n
                            };
                            fr.best = Some(Candidate {
                                gain,
                                feature: j,
                                threshold: midpoint(last[s], v),
                                default_left,
                            });
                        }
                    }
                }
                running[s].add(grad[r], hess[r]);
                last[s] = v;
            }
        }

        // materialize splits and route rows
        let mut child_slots: Vec<Option<(u32, u32)>> = vec![None; k];
        let mut next = Vec::new();
        for (s, fr) in frontier.iter().enumerate() {
            if let Some(c) = fr.best {
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[fr.node] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right: left + 1,
                    default_left: c.default_left,
                };
                let ls = next.len() as u32;
                next.push(Frontier {
                    node: left,
                    stats: Stats::default(),
                    best: None,
                });
                next.push(Frontier {
                    node: left + 1,
                    stats: Stats::default(),
                    best: None,
                });
                child_slots[s] = Some((ls, ls + 1));
            }
        }
        for r in 0..n {
            let s = slot_of_row[r];
            if s == INACTIVE {
                continue;
            }
            let fr = &frontier[s as usize];
            match (fr.best, child_slots[s as usize]) {
                (Some(c), Some((ls, rs))) => {
                    let v = x.get(r, c.feature);
                    let go_left = if v.is_nan() { c.default_left } else { v <= c.threshold };
                    let ns = if go_left { ls } else { rs };
                    slot_of_row[r] = ns;
                    next[ns as usize].stats.add(grad[r], hess[r]);
                }
                _ => {
                    leaf_of_row[r] = fr.node;
                    slot_of_row[r] = INACTIVE;
                }
            }
        }
        for fr in &frontier {
            if fr.best.is_none() {
                nodes[fr.node] = Node::Leaf {
                    value: leaf_weight(fr.stats.g, fr.stats.h, p.lambda),
                };
            }
        }
        frontier = next;
    }
    for fr in &frontier {
        nodes[fr.node] = Node::Leaf {
            value: leaf_weight(fr.stats.g, fr.stats.h, p.lambda),
        };
    }
    for r in 0..n {
        let s = slot_of_row[r];
        if s != INACTIVE {
            leaf_of_row[r] = frontier[s as usize].node;
        }
    }
    let leaf_values = leaf_of_row
        .iter()
        .map(|&i| match nodes[i] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("row routed to internal node"),
        })
        .collect();
    (Tree { nodes }, leaf_values)
}

impl GbdtModel {
    /// Binary classifier on log-loss. `x` may contain `NaN` for missing.
    pub fn fit_classifier(x: &Matrix, y: &[bool], params: &GbdtParams) -> Result<Self> {
        let targets: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Self::fit(x, &targets, Objective::Logistic, params, |_| {})
    }

    pub fn fit_regressor(x: &Matrix, y: &[f64], params: &GbdtParams) -> Result<Self> {
        Self::fit(x, y, Objective::Squared, params, |_| {})
    }

    /// `on_round` receives the training margins after each tree.
    pub fn fit(
        x: &Matrix,
        y: &[f64],
        objective: Objective,
        params: &GbdtParams,
        mut on_round: impl FnMut(&[f64]),
    ) -> Result<Self> {
        params.validate()?;
        if x.rows() != y.len() {
            return Err(Error::invalid("feature/target length mismatch"));
        }
        if x.rows() == 0 {
            return Err(Error::invalid("cannot fit on zero rows"));
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let base_margin = match objective {
            Objective::Logistic => {
                let p = mean.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
            Objective::Squared => mean,
        };
        let sorted = presort(x);
        let mut margin = vec![base_margin; y.len()];
        let mut grad = vec![0.0; y.len()];
        let mut hess = vec![0.0; y.len()];
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            for i in 0..y.len() {
                match objective {
                    Objective::Logistic => {
                        let pi = sigmoid(margin[i]);
                        grad[i] = pi - y[i];
                        hess[i] = pi * (1.0 - pi);
                    }
                    Objective::Squared => {
                        grad[i] = margin[i] - y[i];
                        hess[i] = 1.0;
                    }
                }
            }
            let (tree, leaf_values) = grow_tree(x, &sorted, &grad, &hess, params);
            for (m, v) in margin.iter_mut().zip(&leaf_values) {
                *m += params.learning_rate * v;
            }
            trees.push(tree);
            on_round(&margin);
        }
        Ok(GbdtModel {
            objective,
            base_margin,
            learning_rate: params.learning_rate,
            n_features: x.cols(),
            trees,
        })
    }

    pub fn margin_row(&self, x: &[f64]) -> f64 {
        self.base_margin
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.predict(x))
                .sum::<f64>()
    }

    pub fn predict_margin(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.margin_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trees_predict_base_rate() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]);
        let y = [true, false, false, false];
        let p = GbdtParams {
            n_trees: 0,
            ..Default::default()
        };
        let m = GbdtModel::fit_classifier(&x, &y, &p).unwrap();
        for z in m.predict_margin(&x) {
            assert!((sigmoid(z) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_and_weight_formulas() {
        assert!((split_gain(-2.0, 1.0, 2.0, 1.0, 1.0) - 0.5 * (2.0 + 2.0 - 0.0)).abs() < 1e-15);
        assert_eq!(leaf_weight(-3.0, 2.0, 1.0), 1.0);
    }

    #[test]
    fn missing_rows_take_the_gainful_side() {
        // missing rows are all positives, like the high-x group: they should go right
        let x = Matrix::from_rows(&[
            [1.0],
            [2.0],
            [3.0],
            [4.0],
            [f64::NAN],
            [f64::NAN],
        ]);
        let y = [false, false, true, true, true, true];
        let p = GbdtParams {
            n_trees: 1,
            max_depth: 1,
            ..Default::default()
        };
        let m = GbdtModel::fit_classifier(&x, &y, &p).unwrap();
        match &m.trees[0].nodes[0] {
            Node::Split {
                threshold,
                default_left,
                ..
            } => {
                assert!(*threshold > 2.0 && *threshold < 3.0);
                assert!(!default_left);
            }
            other => panic!("expected split, got {other:?}"),
        }
        let a = m.margin_row(&[f64::NAN]);
        assert_eq!(a, m.margin_row(&[f64::NAN]));
        assert_eq!(a, m.margin_row(&[4.0]));
    }

    #[test]
    fn regressor_fits_step_function() {
        let rows: Vec<[f64; 1]> = (0..40).map(|i| [i as f64]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { 5.0 }).collect();
        let p = GbdtParams {
            n_trees: 60,
            max_depth: 2,
            learning_rate: 0.3,
            lambda: 0.0,
            ..Default::default()
        };
        let m = GbdtModel::fit_regressor(&x, &y, &p).unwrap();
        assert!((m.margin_row(&[3.0]) - 1.0).abs() < 1e-3);
        assert!((m.margin_row(&[33.0]) - 5.0).abs() < 1e-3);
    }
}
