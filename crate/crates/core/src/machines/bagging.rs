use serde::{Deserialize, Serialize};

use super::tree::{train_tree, Tree};
use super::{plurality, Output, Predictor};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, XorShift64Star};

/// Seed value that turns bootstrapping off: every tree then trains on the
/// full dataset, so a one-tree ensemble equals a plain [`train_tree`] fit.
pub const NO_BOOTSTRAP: u64 = u64::MAX;

/// Bootstrap sample used for tree `t`: `n` draws of `below(n)` from a
/// generator seeded with `derive_seed(seed, t)`, in draw order.
pub fn bootstrap_indices(n: usize, seed: u64, t: usize) -> Vec<usize> {
    if seed == NO_BOOTSTRAP {
        return (0..n).collect();
    }
    let mut rng = XorShift64Star::new(derive_seed(seed, t as u64));
    (0..n).map(|_| rng.below(n)).collect()
}

/// Bagged CART trees (random-forest stand-in without feature subsampling).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaggedTrees {
    task: Task,
    dim: usize,
    n_labels: usize,
    seed: u64,
    trees: Vec<Tree>,
}

impl BaggedTrees {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

impl Predictor for BaggedTrees {
    fn task(&self) -> Task {
        self.task
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Result<Output> {
        let outputs = self.trees.iter().map(|t| t.predict(x)).collect::<Result<Vec<_>>>()?;
        Ok(match self.task {
            Task::Regression => Output::Real(super::mean(outputs.iter().map(|o| o.as_f64()))),
            Task::Classification => {
                let mut counts = vec![0usize; self.n_labels];
                for o in outputs {
                    if let Output::Label(l) = o {
                        counts[l] += 1;
                    }
                }
                Output::Label(plurality(&counts))
            }
        })
    }
}

/// `n_trees` depth-limited trees (min leaf 1), tree `t` fitted on
/// [`bootstrap_indices`]`(n, seed, t)`. Predictions are the mean
/// (regression) or plurality vote (classification, ties to the smaller
/// label) over trees.
pub fn train_bagged_trees(data: &Dataset, n_trees: usize, max_depth: usize, seed: u64) -> Result<BaggedTrees> {
    if n_trees < 1 {
        return Err(Error::InvalidParameter("bagging needs at least one tree".into()));
    }
    let trees = (0..n_trees)
        .map(|t| train_tree(&data.subset(&bootstrap_indices(data.len(), seed, t)), max_depth, 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(BaggedTrees {
        task: data.task(),
        dim: data.dim(),
        n_labels: data.n_labels(),
        seed,
        trees,
    })
}
