use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    train_bagged_trees, train_knn, train_lasso, train_nearest_centroid, train_ridge, train_tree, Machine, MachineSet,
    Model,
};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};

/// Untrained machine description: a learner plus its hyperparameters.
///
/// Text form is `learner[:key=value]...`, e.g. `ridge:lambda=0.5` or
/// `tree:max_depth=3:min_leaf=2`. Unspecified keys take the library
/// defaults (lambda 1.0, k 5, max_depth 5, n_trees 10, min_leaf 1, lasso
/// max_iter 1000 and tol 1e-6).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum MachineSpec {
    Ridge {
        lambda: f64,
    },
    Lasso {
        lambda: f64,
        max_iter: usize,
        tol: f64,
    },
    Tree {
        max_depth: usize,
        min_leaf: usize,
    },
    Knn {
        k: usize,
    },
    BaggedTrees {
        n_trees: usize,
        max_depth: usize,
        seed: u64,
    },
    NearestCentroid,
}

impl MachineSpec {
    pub fn ridge() -> Self {
        MachineSpec::Ridge { lambda: 1.0 }
    }

    pub fn lasso() -> Self {
        MachineSpec::Lasso {
            lambda: 1.0,
            max_iter: 1000,
            tol: 1e-6,
        }
    }

    pub fn tree() -> Self {
        MachineSpec::Tree {
            max_depth: 5,
            min_leaf: 1,
        }
    }

    pub fn knn() -> Self {
        MachineSpec::Knn { k: 5 }
    }

    pub fn bagged_trees(seed: u64) -> Self {
        MachineSpec::BaggedTrees {
            n_trees: 10,
            max_depth: 5,
            seed,
        }
    }

    pub fn default_roster(task: Task, seed: u64) -> Vec<Self> {
        match task {
            Task::Regression => vec![
                Self::ridge(),
                Self::lasso(),
                Self::tree(),
                Self::knn(),
                Self::bagged_trees(seed),
            ],
            Task::Classification => vec![
                Self::knn(),
                Self::tree(),
                MachineSpec::NearestCentroid,
                Self::bagged_trees(seed),
            ],
        }
    }

    pub fn learner_name(&self) -> &'static str {
        match self {
            MachineSpec::Ridge { .. } => "ridge",
            MachineSpec::Lasso { .. } => "lasso",
            MachineSpec::Tree { .. } => "tree",
            MachineSpec::Knn { .. } => "knn",
            MachineSpec::BaggedTrees { .. } => "bagged_trees",
            MachineSpec::NearestCentroid => "nearest_centroid",
        }
    }

    /// Replaces the bagging seed, leaving other learners untouched.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            MachineSpec::BaggedTrees { n_trees, max_depth, .. } => MachineSpec::BaggedTrees {
                n_trees,
                max_depth,
                seed,
            },
            other => other,
        }
    }

    pub fn train(&self, data: &Dataset) -> Result<Model> {
        Ok(match *self {
            MachineSpec::Ridge { lambda } => Model::Linear(train_ridge(data, lambda)?),
            MachineSpec::Lasso { lambda, max_iter, tol } => Model::Linear(train_lasso(data, lambda, max_iter, tol)?),
            MachineSpec::Tree { max_depth, min_leaf } => Model::Tree(train_tree(data, max_depth, min_leaf)?),
            MachineSpec::Knn { k } => Model::Knn(train_knn(data, k)?),
            MachineSpec::BaggedTrees {
                n_trees,
                max_depth,
                seed,
            } => Model::BaggedTrees(train_bagged_trees(data, n_trees, max_depth, seed)?),
            MachineSpec::NearestCentroid => Model::NearestCentroid(train_nearest_centroid(data)?),
        })
    }
}

/// Trains every spec on `data`. Machines are named after their learner;
/// repeats get a `_2`, `_3`, ... suffix.
pub fn train_roster(specs: &[MachineSpec], data: &Dataset) -> Result<MachineSet> {
    let mut machines = Vec::with_capacity(specs.len());
    let mut used: Vec<String> = Vec::new();
    for spec in specs {
        let base = spec.learner_name();
        let mut name = base.to_string();
        let mut k = 2;
        while used.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        used.push(name.clone());
        machines.push(Machine::new(name, spec.train(data)?));
    }
    MachineSet::new(machines)
}

impl fmt::Display for MachineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MachineSpec::Ridge { lambda } => write!(f, "ridge:lambda={lambda}"),
            MachineSpec::Lasso { lambda, max_iter, tol } => {
                write!(f, "lasso:lambda={lambda}:max_iter={max_iter}:tol={tol}")
            }
            MachineSpec::Tree { max_depth, min_leaf } => write!(f, "tree:max_depth={max_depth}:min_leaf={min_leaf}"),
            MachineSpec::Knn { k } => write!(f, "knn:k={k}"),
            MachineSpec::BaggedTrees {
                n_trees,
                max_depth,
                seed,
            } => {
                write!(f, "bagged_trees:n_trees={n_trees}:max_depth={max_depth}:seed={seed}")
            }
            MachineSpec::NearestCentroid => f.write_str("nearest_centroid"),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse {key}={value:?}")))
}

impl FromStr for MachineSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let learner = parts.next().unwrap_or_default();
        let mut spec = match learner {
            "ridge" => Self::ridge(),
            "lasso" => Self::lasso(),
            "tree" => Self::tree(),
            "knn" => Self::knn(),
            "bagged_trees" | "bagged" | "forest" => Self::bagged_trees(0),
            "nearest_centroid" | "centroid" => MachineSpec::NearestCentroid,
            other => return Err(Error::InvalidParameter(format!("unknown learner {other:?}"))),
        };
        for kv in parts {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got {kv:?}")))?;
            match (&mut spec, key) {
                (MachineSpec::Ridge { lambda } | MachineSpec::Lasso { lambda, .. }, "lambda") => {
                    *lambda = parse_value(key, value)?
                }
                (MachineSpec::Lasso { max_iter, .. }, "max_iter") => *max_iter = parse_value(key, value)?,
                (MachineSpec::Lasso { tol, .. }, "tol") => *tol = parse_value(key, value)?,
                (
                    MachineSpec::Tree { max_depth, .. } | MachineSpec::BaggedTrees { max_depth, .. },
                    "max_depth" | "depth",
                ) => *max_depth = parse_value(key, value)?,
                (MachineSpec::Tree { min_leaf, .. }, "min_leaf") => *min_leaf = parse_value(key, value)?,
                (MachineSpec::Knn { k }, "k") => *k = parse_value(key, value)?,
                (MachineSpec::BaggedTrees { n_trees, .. }, "n_trees") => *n_trees = parse_value(key, value)?,
                (MachineSpec::BaggedTrees { seed, .. }, "seed") => *seed = parse_value(key, value)?,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "learner {learner:?} has no parameter {key:?}"
                    )))
                }
            }
        }
        Ok(spec)
    }
}
