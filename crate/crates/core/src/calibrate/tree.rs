//! Regression trees and bagged random forests.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::model::{CalibrationModel, ModelSpec, Params};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A binary regression tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, samples } => Some((*value, *samples)),
            Node::Split { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, Copy)]
struct TreeParams {
    max_depth: usize,
    min_leaf: usize,
    /// Features examined per split; `p` means all of them.
    features_per_split: usize,
}

struct Builder<'a, R> {
    x: &'a Matrix,
    y: &'a [f64],
    params: TreeParams,
    rng: R,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let first = self.y[idx[0]];
        let constant = idx.iter().all(|&i| self.y[i] == first);
        let mean = if constant {
            first
        } else {
            idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64
        };
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: mean,
            samples: n,
        });
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return slot;
        }
        if constant {
            return slot;
        }
        let Some(best) = self.best_split(idx, mean) else {
            return slot;
        };
        let (feature, threshold) = (best.feature, best.threshold);
        idx.sort_by(|&a, &b| self.x.get(a, feature).total_cmp(&self.x.get(b, feature)));
        let k = idx.partition_point(|&i| self.x.get(i, feature) < threshold);
        let (l, r) = idx.split_at_mut(k);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    /// Exhaustive search over the sampled features and every midpoint between
    /// consecutive distinct values. Gains are compared strictly, with features
    /// in ascending order and thresholds ascending, so ties keep the lowest
    /// feature index and then the lowest threshold.
    fn best_split(&mut self, idx: &[usize], mean: f64) -> Option<BestSplit> {
        let p = self.x.cols();
        let mut features: Vec<usize> = if self.params.features_per_split >= p {
            (0..p).collect()
        } else {
            sample(&mut self.rng, p, self.params.features_per_split).into_vec()
        };
        features.sort_unstable();

        let n = idx.len();
        let min_leaf = self.params.min_leaf;
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        let mut prefix = vec![0.0; n + 1];
        for &f in &features {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            for (k, &i) in order.iter().enumerate() {
                prefix[k + 1] = prefix[k] + (self.y[i] - mean);
            }
            let total = prefix[n];
            for k in min_leaf..=n - min_leaf {
                let lo = self.x.get(order[k - 1], f);
                let hi = self.x.get(order[k], f);
                if lo == hi {
                    continue;
                }
                let sl = prefix[k];
                let sr = total - sl;
                // SSE reduction, on targets centered at the node mean
                let gain = sl * sl / k as f64 + sr * sr / (n - k) as f64 - total * total / n as f64;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold: midpoint(lo, hi),
                    });
                }
            }
        }
        best
    }
}

/// Split point between two distinct sorted values. When they are adjacent
/// floats the midpoint rounds onto `lo`, which would send everything right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    if m > lo {
        m
    } else {
        hi
    }
}

fn check_tree_params(n: usize, max_depth: usize, min_leaf: usize) -> Result<()> {
    if max_depth < 1 {
        return Err(Error::InvalidParameter(
            "max_depth must be at least 1".into(),
        ));
    }
    if min_leaf < 1 {
        return Err(Error::InvalidParameter(
            "min_leaf must be at least 1".into(),
        ));
    }
    if n < 2 * min_leaf {
        return Err(Error::TooShort {
            needed: 2 * min_leaf,
            got: n,
        });
    }
    Ok(())
}

fn grow<R: Rng>(d: &Dataset, rows: &mut [usize], params: TreeParams, rng: R) -> Tree {
    let mut b = Builder {
        x: d.x(),
        y: d.y(),
        params,
        rng,
        nodes: Vec::new(),
    };
    b.build(rows, 0);
    Tree { nodes: b.nodes }
}

/// Single regression tree over every column of the dataset.
pub fn fit_dt(d: &Dataset, max_depth: usize, min_leaf: usize) -> Result<CalibrationModel> {
    check_tree_params(d.n(), max_depth, min_leaf)?;
    let params = TreeParams {
        max_depth,
        min_leaf,
        features_per_split: d.p(),
    };
    let mut rows: Vec<usize> = (0..d.n()).collect();
    // every feature is examined, so the generator is never drawn from
    let tree = grow(d, &mut rows, params, ChaCha8Rng::seed_from_u64(0));
    Ok(CalibrationModel::assemble(
        ModelSpec::Dt {
            max_depth,
            min_leaf,
        },
        Params::Tree { tree },
        d,
    ))
}

/// `max(1, ⌈p/3⌉)`.
pub fn default_feature_subset(p: usize) -> usize {
    p.div_ceil(3).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subset: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: super::model::DEFAULT_N_TREES,
            max_depth: super::model::DEFAULT_MAX_DEPTH,
            min_leaf: super::model::DEFAULT_MIN_LEAF,
            feature_subset: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Generator for tree `index` of a forest seeded with `seed`: one ChaCha
/// stream per tree, so trees can be grown in any order or in parallel.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Random forest: bagged trees with a random feature subset at every split.
pub fn fit_rfr(d: &Dataset, fp: ForestParams) -> Result<CalibrationModel> {
    if fp.n_trees < 1 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    check_tree_params(d.n(), fp.max_depth, fp.min_leaf)?;
    let m = fp
        .feature_subset
        .unwrap_or_else(|| default_feature_subset(d.p()));
    if m < 1 || m > d.p() {
        return Err(Error::InvalidParameter(format!(
            "feature subset {m} outside 1..={}",
            d.p()
        )));
    }
    let params = TreeParams {
        max_depth: fp.max_depth,
        min_leaf: fp.min_leaf,
        features_per_split: m,
    };
    let n = d.n();
    let trees: Vec<Tree> = (0..fp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(fp.seed, t);
            let mut rows: Vec<usize> = if fp.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            if rows.len() < 2 * fp.min_leaf {
                rows = (0..n).collect();
            }
            grow(d, &mut rows, params, rng)
        })
        .collect();
    Ok(CalibrationModel::assemble(
        ModelSpec::Rfr {
            n_trees: fp.n_trees,
            max_depth: fp.max_depth,
            min_leaf: fp.min_leaf,
            feature_subset: fp.feature_subset,
            bootstrap: fp.bootstrap,
            seed: fp.seed,
        },
        Params::Forest { trees },
        d,
    ))
}
