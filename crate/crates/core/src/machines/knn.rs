use serde::{Deserialize, Serialize};

use super::{plurality, Output, Predictor};
use crate::data::{Dataset, Matrix, Targets, Task};
use crate::error::{Error, Result};

/// k-nearest-neighbour regressor or classifier over stored training rows.
///
/// Neighbours are ranked by Euclidean distance with ties going to the lower
/// row index. Regression averages the neighbours' responses in ascending row
/// order; classification takes a plurality vote, ties to the smaller label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    features: Matrix,
    targets: Targets,
}

impl Knn {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Row indices of the `k` nearest training points, nearest first.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut ranked: Vec<(f64, usize)> = self
            .features
            .iter_rows()
            .enumerate()
            .map(|(i, row)| (sq_dist(row, x), i))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.truncate(self.k);
        ranked.into_iter().map(|(_, i)| i).collect()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

impl Predictor for Knn {
    fn task(&self) -> Task {
        self.targets.task()
    }

    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn predict(&self, x: &[f64]) -> Result<Output> {
        let mut nb = self.neighbours(x);
        nb.sort_unstable();
        Ok(match &self.targets {
            Targets::Real(y) => Output::Real(super::mean(nb.iter().map(|&i| y[i]))),
            Targets::Labels { labels, names } => {
                let mut counts = vec![0usize; names.len()];
                nb.iter().for_each(|&i| counts[labels[i]] += 1);
                Output::Label(plurality(&counts))
            }
        })
    }
}

pub fn train_knn(data: &Dataset, k: usize) -> Result<Knn> {
    if k < 1 || k > data.len() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 1..={}, got {k}",
            data.len()
        )));
    }
    Ok(Knn {
        k,
        features: data.features().clone(),
        targets: data.targets().clone(),
    })
}
