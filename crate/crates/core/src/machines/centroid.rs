use serde::{Deserialize, Serialize};

use super::knn::sq_dist;
use super::{require_task, Output, Predictor};
use crate::data::{Dataset, Task};
use crate::error::Result;

/// Nearest-centroid classifier. Only labels present in the training data get
/// a centroid, so predictions stay inside the training label universe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroid {
    dim: usize,
    /// `(label, mean vector)`, ascending by label.
    centroids: Vec<(usize, Vec<f64>)>,
}

impl NearestCentroid {
    pub fn centroids(&self) -> &[(usize, Vec<f64>)] {
        &self.centroids
    }
}

impl Predictor for NearestCentroid {
    fn task(&self) -> Task {
        Task::Classification
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Result<Output> {
        let mut best = (f64::INFINITY, 0);
        for (label, c) in &self.centroids {
            let d = sq_dist(c, x);
            if d < best.0 {
                best = (d, *label);
            }
        }
        Ok(Output::Label(best.1))
    }
}

pub fn train_nearest_centroid(data: &Dataset) -> Result<NearestCentroid> {
    require_task(data, Task::Classification, "nearest_centroid")?;
    let labels = data.labels()?;
    let k = data.n_labels();
    let mut sums = vec![vec![0.0; data.dim()]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    let centroids = sums
        .into_iter()
        .zip(counts)
        .enumerate()
        .filter(|(_, (_, c))| *c > 0)
        .map(|(l, (s, c))| (l, s.into_iter().map(|v| v / c as f64).collect()))
        .collect();
    Ok(NearestCentroid {
        dim: data.dim(),
        centroids,
    })
}
