//! Bagged CART regression forest.
//!
//! Besides the usual average of per-tree leaf means, the forest exposes its
//! prediction as a weighted average of training responses. For tree `b` let
//! `L_b(x)` be the multiset of (bootstrap) training rows in the leaf reached
//! by `x`; then
//!
//! ```text
//! w_i(x) = 1/B * sum_b  #{i in L_b(x)} / |L_b(x)|
//! m(x)   = sum_i w_i(x) y_i
//! ```
//!
//! Rows drawn several times into a bootstrap sample are counted with their
//! multiplicity, which makes both prediction paths agree.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// n draws with replacement per tree.
    Bootstrap,
    /// Every tree sees each row exactly once.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    /// `None` grows until another stopping rule applies.
    pub max_depth: Option<usize>,
    /// Candidate features per node; `None` means `ceil(d / 3)`.
    pub features_per_split: Option<usize>,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            min_leaf: 2,
            max_depth: None,
            features_per_split: None,
            sampling: Sampling::Bootstrap,
            seed: 42,
        }
    }
}

impl ForestParams {
    pub fn resolved_features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| math::ceil(n_features as f64 / 3.0) as usize)
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// `rows` lists training rows with bootstrap multiplicity.
    Leaf { rows: Vec<usize>, mean: f64 },
}

/// Nodes in an arena; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub bootstrap: Vec<usize>,
}

impl Tree {
    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { .. } => return k,
            }
        }
    }

    pub fn leaf(&self, x: &[f64]) -> (&[usize], f64) {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { rows, mean } => (rows, *mean),
            TreeNode::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub train_y: Vec<f64>,
    pub n_features: usize,
    pub params: ForestParams,
}

impl ForestModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::LengthMismatch { left: n, right: y.len() });
        }
        if n == 0 {
            return Err(Error::Empty("forest needs training rows"));
        }
        let d = x[0].len();
        if let Some(bad) = x.iter().find(|r| r.len() != d) {
            return Err(Error::Layout {
                expected: d,
                found: bad.len(),
            });
        }
        if params.n_trees == 0 {
            return Err(Error::Hyperparameter("n_trees must be at least 1".into()));
        }
        if params.min_leaf == 0 || params.min_leaf > n {
            return Err(Error::Hyperparameter(alloc::format!(
                "min_leaf must be in 1..={n}, got {}",
                params.min_leaf
            )));
        }
        if params.features_per_split == Some(0) || params.features_per_split.is_some_and(|m| m > d) {
            return Err(Error::Hyperparameter(alloc::format!(
                "features_per_split must be in 1..={d}"
            )));
        }

        let mtry = params.resolved_features_per_split(d).min(d);
        let trees = (0..params.n_trees)
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(b as u64);
                let bootstrap = match params.sampling {
                    Sampling::Identity => (0..n).collect(),
                    Sampling::Bootstrap => {
                        let mut s: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                        s.sort_unstable();
                        s
                    }
                };
                let mut grower = Grower {
                    x,
                    y,
                    d,
                    mtry,
                    min_leaf: params.min_leaf,
                    max_depth: params.max_depth,
                    rng,
                    nodes: Vec::new(),
                };
                grower.grow(bootstrap.clone(), 0);
                Tree {
                    nodes: grower.nodes,
                    bootstrap,
                }
            })
            .collect();

        Ok(ForestModel {
            trees,
            train_y: y.to_vec(),
            n_features: d,
            params: params.clone(),
        })
    }

    /// Leaf co-occurrence weights over the training rows.
    pub fn weights(&self, query: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(query)?;
        let mut w = vec![0.0; self.train_y.len()];
        let b = self.trees.len() as f64;
        for tree in &self.trees {
            let (rows, _) = tree.leaf(query);
            let share = 1.0 / (rows.len() as f64 * b);
            for &r in rows {
                w[r] += share;
            }
        }
        Ok(w)
    }

    /// `sum_i w_i(x) y_i`.
    pub fn predict_one(&self, query: &[f64]) -> Result<f64> {
        let w = self.weights(query)?;
        Ok(w.iter().zip(&self.train_y).map(|(w, y)| w * y).sum())
    }

    /// Average of per-tree leaf means; equals [`Self::predict_one`] up to
    /// rounding.
    pub fn predict_by_leaf_means(&self, query: &[f64]) -> Result<f64> {
        self.check_dim(query)?;
        let total: f64 = self.trees.iter().map(|t| t.leaf(query).1).sum();
        Ok(total / self.trees.len() as f64)
    }

    fn check_dim(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.n_features {
            return Err(Error::Layout {
                expected: self.n_features,
                found: query.len(),
            });
        }
        Ok(())
    }
}

pub fn fit_forest(design: &DesignMatrix, params: &ForestParams) -> Result<ForestModel> {
    ForestModel::fit(design.rows(), design.targets(), params)
}

pub fn forest_weights(model: &ForestModel, query: &[f64]) -> Result<Vec<f64>> {
    model.weights(query)
}

pub fn predict_forest(model: &ForestModel, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
    queries.iter().map(|q| model.predict_one(q)).collect()
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    d: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let first = self.y[samples[0]];
        let constant = samples.iter().all(|&s| self.y[s] == first);
        let depth_reached = self.max_depth.is_some_and(|m| depth >= m);

        let split = if constant || depth_reached || samples.len() < 2 * self.min_leaf {
            None
        } else {
            self.best_split(&samples)
        };

        let Some(split) = split else {
            let mean = samples.iter().map(|&s| self.y[s]).sum::<f64>() / samples.len() as f64;
            self.nodes.push(TreeNode::Leaf { rows: samples, mean });
            return at;
        };

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.x[s][split.feature] <= split.threshold);
        self.nodes.push(TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        if let TreeNode::Split { left, right, .. } = &mut self.nodes[at] {
            *left = l;
            *right = r;
        }
        at
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        if self.mtry >= self.d {
            return (0..self.d).collect();
        }
        let mut f = rand::seq::index::sample(&mut self.rng, self.d, self.mtry).into_vec();
        f.sort_unstable();
        f
    }

    /// Minimises the summed child SSE. Features are scanned in ascending
    /// index order and thresholds ascending; only a strictly better score
    /// replaces the incumbent.
    fn best_split(&mut self, samples: &[usize]) -> Option<SplitChoice> {
        let n = samples.len();
        let mean = samples.iter().map(|&s| self.y[s]).sum::<f64>() / n as f64;
        let mut best: Option<SplitChoice> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);

        for f in self.candidate_features() {
            order.clear();
            order.extend(samples.iter().map(|&s| (self.x[s][f], self.y[s] - mean)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));

            let total: f64 = order.iter().map(|o| o.1).sum();
            let total_sq: f64 = order.iter().map(|o| o.1 * o.1).sum();
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for k in 1..n {
                let (xv, yc) = order[k - 1];
                sum_l += yc;
                sq_l += yc * yc;
                if k < self.min_leaf || n - k < self.min_leaf || xv == order[k].0 {
                    continue;
                }
                let nl = k as f64;
                let nr = (n - k) as f64;
                let sum_r = total - sum_l;
                let score = (sq_l - sum_l * sum_l / nl) + ((total_sq - sq_l) - sum_r * sum_r / nr);
                if best.as_ref().map_or(true, |b| score < b.score) {
                    let hi = order[k].0;
                    let mut threshold = 0.5 * (xv + hi);
                    if !(threshold < hi) {
                        threshold = xv;
                    }
                    best = Some(SplitChoice {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_trees: usize) -> ForestParams {
        ForestParams {
            n_trees,
            min_leaf: 1,
            max_depth: None,
            features_per_split: None,
            sampling: Sampling::Identity,
            seed: 7,
        }
    }

    #[test]
    fn depth_zero_tree_is_one_leaf_with_bootstrap_mean() {
        let x: Vec<Vec<f64>> = (0..10).map(|k| vec![f64::from(k)]).collect();
        let y: Vec<f64> = (0..10).map(|k| f64::from(k * k)).collect();
        let p = ForestParams {
            max_depth: Some(0),
            sampling: Sampling::Bootstrap,
            ..params(1)
        };
        let m = ForestModel::fit(&x, &y, &p).unwrap();
        assert_eq!(m.trees[0].nodes.len(), 1);
        let boot = &m.trees[0].bootstrap;
        assert_eq!(boot.len(), 10);
        let mean = boot.iter().map(|&i| y[i]).sum::<f64>() / 10.0;
        for q in [-5.0, 3.3, 100.0] {
            assert!((m.predict_one(&[q]).unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_target_never_splits() {
        let x: Vec<Vec<f64>> = (0..20).map(|k| vec![f64::from(k), f64::from(20 - k)]).collect();
        let y = vec![3.0; 20];
        let m = ForestModel::fit(
            &x,
            &y,
            &ForestParams {
                sampling: Sampling::Bootstrap,
                ..params(5)
            },
        )
        .unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        assert_eq!(m.predict_one(&[4.0, 1.0]).unwrap(), 3.0);
    }

    #[test]
    fn uniform_weights_for_single_leaf_identity_sample() {
        let x: Vec<Vec<f64>> = (0..4).map(|k| vec![f64::from(k)]).collect();
        let m = ForestModel::fit(
            &x,
            &[1.0, 2.0, 3.0, 4.0],
            &ForestParams {
                max_depth: Some(0),
                ..params(1)
            },
        )
        .unwrap();
        assert_eq!(m.weights(&[1.0]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn leaf_of_two_rows_gives_half_weights() {
        // rows 1 and 2 share y, so no split between them lowers the error
        let x: Vec<Vec<f64>> = (0..4).map(|k| vec![f64::from(k)]).collect();
        let y = [0.0, 5.0, 5.0, 10.0];
        let m = ForestModel::fit(&x, &y, &params(1)).unwrap();
        let w = m.weights(&[1.5]).unwrap();
        assert_eq!(w, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn two_trees_average_their_leaf_weights() {
        // hand-built forest: leaves {0} and {0,1}
        let t1 = Tree {
            nodes: vec![TreeNode::Leaf {
                rows: vec![0],
                mean: 1.0,
            }],
            bootstrap: vec![0],
        };
        let t2 = Tree {
            nodes: vec![TreeNode::Leaf {
                rows: vec![0, 1],
                mean: 1.5,
            }],
            bootstrap: vec![0, 1],
        };
        let m = ForestModel {
            trees: vec![t1, t2],
            train_y: vec![1.0, 2.0, 3.0],
            n_features: 1,
            params: params(2),
        };
        assert_eq!(m.weights(&[0.0]).unwrap(), vec![0.75, 0.25, 0.0]);
        assert_eq!(m.predict_one(&[0.0]).unwrap(), 1.25);
        assert_eq!(m.predict_by_leaf_means(&[0.0]).unwrap(), 1.25);
    }

    #[test]
    fn min_leaf_larger_than_n_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let p = ForestParams {
            min_leaf: 3,
            ..params(1)
        };
        assert!(matches!(ForestModel::fit(&x, &[0.0, 1.0], &p), Err(Error::Hyperparameter(_))));
        let p = ForestParams {
            n_trees: 0,
            ..params(1)
        };
        assert!(matches!(ForestModel::fit(&x, &[0.0, 1.0], &p), Err(Error::Hyperparameter(_))));
    }

    #[test]
    fn single_row_single_tree() {
        let m = ForestModel::fit(&[vec![1.0]], &[4.0], &params(1)).unwrap();
        assert_eq!(m.predict_one(&[9.0]).unwrap(), 4.0);
    }

    #[test]
    fn query_dimension_is_checked() {
        let m = ForestModel::fit(&[vec![1.0, 2.0]], &[4.0], &params(1)).unwrap();
        assert_eq!(
            m.weights(&[1.0]).unwrap_err(),
            Error::Layout { expected: 2, found: 1 }
        );
    }

    #[test]
    fn default_feature_subset_is_a_third_rounded_up() {
        let p = ForestParams::default();
        assert_eq!(p.resolved_features_per_split(4), 2);
        assert_eq!(p.resolved_features_per_split(14), 5);
        assert_eq!(p.resolved_features_per_split(1), 1);
        assert_eq!(p.n_trees, 200);
        assert_eq!(p.min_leaf, 2);
    }
}
