//! CART trees: greedy axis-aligned binary splits minimizing the summed
//! squared error (regression) or the size-weighted Gini impurity
//! (classification).

use serde::{Deserialize, Serialize};

use super::{plurality, Output, Predictor};
use crate::data::{Dataset, Targets, Task};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: Output,
        /// Training rows that reached this leaf.
        size: usize,
    },
    /// Inputs with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    task: Task,
    dim: usize,
    /// Arena; the root is node 0.
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf node reached by `x`.
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl Predictor for Tree {
    fn task(&self) -> Task {
        self.task
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Result<Output> {
        match &self.nodes[self.leaf_of(x)] {
            Node::Leaf { value, .. } => Ok(*value),
            Node::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }
}

enum Responses<'a> {
    Real(&'a [f64]),
    Labels(&'a [usize], usize),
}

impl Responses<'_> {
    /// Node impurity: SSE around the mean, or `n - Σ c²/n` (n times Gini).
    fn impurity(&self, rows: &[usize]) -> f64 {
        match self {
            Responses::Real(y) => {
                let mean = super::mean(rows.iter().map(|&i| y[i]));
                rows.iter().map(|&i| (y[i] - mean).powi(2)).sum()
            }
            Responses::Labels(l, k) => {
                let mut counts = vec![0usize; *k];
                rows.iter().for_each(|&i| counts[l[i]] += 1);
                gini_mass(&counts, rows.len())
            }
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self {
            Responses::Real(y) => rows.iter().all(|&i| y[i] == y[rows[0]]),
            Responses::Labels(l, _) => rows.iter().all(|&i| l[i] == l[rows[0]]),
        }
    }

    fn leaf_value(&self, rows: &[usize]) -> Output {
        match self {
            Responses::Real(y) => {
                let mut sorted = rows.to_vec();
                sorted.sort_unstable();
                Output::Real(super::mean(sorted.iter().map(|&i| y[i])))
            }
            Responses::Labels(l, k) => {
                let mut counts = vec![0usize; *k];
                rows.iter().for_each(|&i| counts[l[i]] += 1);
                Output::Label(plurality(&counts))
            }
        }
    }
}

/// `n - Σ c²/n`, zero for an empty side.
pub(crate) fn gini_mass(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: usize = counts.iter().map(|c| c * c).sum();
    n as f64 - sq as f64 / n as f64
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a> {
    data: &'a Dataset,
    responses: Responses<'a>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.responses.leaf_value(&rows),
            size: rows.len(),
        });
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf || self.responses.is_pure(&rows) {
            return id;
        }
        let parent = self.responses.impurity(&rows);
        let Some(best) = self.best_split(&rows) else {
            return id;
        };
        if best.score.is_nan() || best.score >= parent - 1e-12 * parent.abs().max(1.0) {
            return id;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.data.row(i)[best.feature] <= best.threshold);
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    /// Lowest child impurity over all features and all cut points between
    /// consecutive distinct values; the first candidate in (feature, value)
    /// order wins ties.
    fn best_split(&self, rows: &[usize]) -> Option<SplitChoice> {
        let n = rows.len();
        let mut best: Option<SplitChoice> = None;
        let mut order = rows.to_vec();
        for feature in 0..self.data.dim() {
            let value = |i: usize| self.data.row(i)[feature];
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let mut sweep = Sweep::new(&self.responses, &order);
            for pos in 1..n {
                sweep.advance(order[pos - 1]);
                let (lo, hi) = (value(order[pos - 1]), value(order[pos]));
                if lo == hi || pos < self.min_leaf || n - pos < self.min_leaf {
                    continue;
                }
                let score = sweep.score();
                if best.as_ref().is_none_or(|b| score < b.score) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(SplitChoice {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Left-to-right running statistics for one sorted feature.
enum Sweep<'a> {
    Real {
        y: &'a [f64],
        left: (f64, f64, usize),
        total: (f64, f64, usize),
    },
    Labels {
        l: &'a [usize],
        left: Vec<usize>,
        total: Vec<usize>,
        n_left: usize,
        n: usize,
    },
}

impl<'a> Sweep<'a> {
    fn new(responses: &Responses<'a>, rows: &[usize]) -> Self {
        match *responses {
            Responses::Real(y) => {
                let total = rows
                    .iter()
                    .fold((0.0, 0.0, 0), |(s, q, c), &i| (s + y[i], q + y[i] * y[i], c + 1));
                Sweep::Real {
                    y,
                    left: (0.0, 0.0, 0),
                    total,
                }
            }
            Responses::Labels(l, k) => {
                let mut total = vec![0; k];
                rows.iter().for_each(|&i| total[l[i]] += 1);
                Sweep::Labels {
                    l,
                    left: vec![0; k],
                    total,
                    n_left: 0,
                    n: rows.len(),
                }
            }
        }
    }

    fn advance(&mut self, row: usize) {
        match self {
            Sweep::Real { y, left, .. } => {
                left.0 += y[row];
                left.1 += y[row] * y[row];
                left.2 += 1;
            }
            Sweep::Labels { l, left, n_left, .. } => {
                left[l[row]] += 1;
                *n_left += 1;
            }
        }
    }

    fn score(&self) -> f64 {
        match self {
            Sweep::Real { left, total, .. } => {
                let sse = |s: f64, q: f64, c: usize| (q - s * s / c as f64).max(0.0);
                let (rs, rq, rc) = (total.0 - left.0, total.1 - left.1, total.2 - left.2);
                sse(left.0, left.1, left.2) + sse(rs, rq, rc)
            }
            Sweep::Labels {
                left, total, n_left, n, ..
            } => {
                let right: Vec<usize> = total.iter().zip(left).map(|(t, a)| t - a).collect();
                gini_mass(left, *n_left) + gini_mass(&right, n - n_left)
            }
        }
    }
}

/// Greedy CART with depth limit `max_depth` and at least `min_leaf` training
/// rows per leaf. A node becomes a leaf when it is pure, too small to split,
/// or no split lowers its impurity.
pub fn train_tree(data: &Dataset, max_depth: usize, min_leaf: usize) -> Result<Tree> {
    if max_depth < 1 || min_leaf < 1 {
        return Err(Error::InvalidParameter(format!(
            "tree needs max_depth >= 1 and min_leaf >= 1, got {max_depth} and {min_leaf}"
        )));
    }
    let responses = match data.targets() {
        Targets::Real(y) => Responses::Real(y),
        Targets::Labels { labels, names } => Responses::Labels(labels, names.len()),
    };
    let mut builder = Builder {
        data,
        responses,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    builder.build((0..data.len()).collect(), 0);
    Ok(Tree {
        task: data.task(),
        dim: data.dim(),
        nodes: builder.nodes,
    })
}
