//! Bagged CART classifiers with Gini splits and per-split feature subsampling.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::tree::{midpoint, Node, Tree};
use crate::rng::{derive_seed_index, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `round(sqrt(d))`.
    pub mtry: Option<usize>,
    /// Draw a bootstrap sample per tree. Disabling it is meant for debugging.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_depth: Some(12),
            min_leaf: 1,
            mtry: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_leaf == 0 || self.max_depth == Some(0) || self.mtry == Some(0)
        {
            return Err(Error::Config(
                "random forest n_trees, max_depth, min_leaf and mtry must be positive".into(),
            ));
        }
        Ok(())
    }

    fn mtry_for(&self, d: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1))
            .min(d)
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

/// Gini impurity of a node with `pos` positives out of `n`.
pub fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
    scratch: Vec<(f64, bool)>,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        self.nodes.push(Node::Leaf {
            value: pos as f64 / n as f64,
        });
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        if pos == 0 || pos == n || n < 2 * self.params.min_leaf || !depth_ok {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, pos, rng) else {
            return id;
        };
        // stable partition keeps the row order deterministic
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x.get(r, feature) <= threshold);
        let l = self.build(&mut left, depth + 1, rng);
        let r = self.build(&mut right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
            default_left: left.len() >= right.len(),
        };
        id
    }

    /// Minimizes the size-weighted child impurity over `mtry` random features.
    fn best_split(&mut self, rows: &[usize], pos: usize, rng: &mut Rng) -> Option<(usize, f64)> {
        let d = self.x.cols();
        let n = rows.len() as f64;
        let min_leaf = self.params.min_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut features = sample(rng, d, self.mtry).into_vec();
        features.sort_unstable();
        for f in features {
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for i in 1..self.scratch.len() {
                if self.scratch[i - 1].1 {
                    left_pos += 1;
                }
                let (lo, hi) = (self.scratch[i - 1].0, self.scratch[i].0);
                if lo == hi || i < min_leaf || rows.len() - i < min_leaf {
                    continue;
                }
                let nl = i as f64;
                let nr = n - nl;
                let rp = (pos - left_pos) as f64;
                let impurity = nl * gini(left_pos as f64, nl) + nr * gini(rp, nr);
                if best.is_none_or(|b| impurity < b.0) {
                    best = Some((impurity, f, midpoint(lo, hi)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl RandomForest {
    /// Trees are independent: tree `t` draws from its own stream derived from
    /// `(seed, t)`, so results do not depend on thread scheduling.
    pub fn fit(x: &Matrix, y: &[bool], params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if x.rows() != y.len() || x.rows() == 0 {
            return Err(Error::invalid("random forest needs matching, non-empty x and y"));
        }
        if x.has_missing() {
            return Err(Error::Model("random forest requires complete features".into()));
        }
        let mtry = params.mtry_for(x.cols());
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed_index(seed, t as u64));
                let n = x.rows();
                let mut rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                rows.sort_unstable();
                let mut b = Builder {
                    x,
                    y,
                    params,
                    mtry,
                    nodes: Vec::new(),
                    scratch: Vec::with_capacity(n),
                };
                b.build(&mut rows, 0, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(RandomForest {
            n_features: x.cols(),
            trees,
        })
    }

    /// Mean leaf positive fraction across trees.
    pub fn proba_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
