//! COBRA-style majority vote for classification.
//!
//! The consensus step mirrors regression COBRA with the epsilon test replaced
//! by label equality: aggregation point `X_i` is retained when at least
//! `alpha` machines give it the same label they give the query. The
//! prediction is the most frequent true label among retained points, ties to
//! the smaller label. An empty consensus falls back to the majority label of
//! the whole aggregation part.

use serde::{Deserialize, Serialize};

use crate::data::{Matrix, SplitDataset, Task};
use crate::error::{Error, Result};
use crate::machines::MachineSet;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifierCobraModel {
    machines: MachineSet,
    /// `labels[j][i]`: machine `j`'s label for aggregation point `i`.
    labels: Vec<Vec<usize>>,
    responses: Vec<usize>,
    alpha: usize,
    /// Label names indexed by label; its length is the universe size `K`.
    label_names: Vec<String>,
}

pub(crate) fn retained_labels(labels: &[Vec<usize>], outputs: &[usize], alpha: usize) -> Vec<usize> {
    let l = labels.first().map_or(0, Vec::len);
    (0..l)
        .filter(|&i| labels.iter().zip(outputs).filter(|(row, o)| row[i] == **o).count() >= alpha)
        .collect()
}

pub(crate) fn label_counts(responses: &[usize], indices: impl IntoIterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for i in indices {
        counts[responses[i]] += 1;
    }
    counts
}

impl ClassifierCobraModel {
    pub fn fit(machines: MachineSet, split: &SplitDataset, alpha: usize) -> Result<Self> {
        machines.require(Task::Classification)?;
        let agg = &split.aggregation;
        let responses = agg.labels()?.to_vec();
        let names = agg.label_names().unwrap_or_default().to_vec();
        let labels = machines.label_table(agg)?;
        Self::from_labels(machines, labels, responses, names, alpha)
    }

    pub fn from_labels(
        machines: MachineSet,
        labels: Vec<Vec<usize>>,
        responses: Vec<usize>,
        label_names: Vec<String>,
        alpha: usize,
    ) -> Result<Self> {
        machines.require(Task::Classification)?;
        let m = machines.len();
        if alpha < 1 || alpha > m {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in 1..={m}, got {alpha}"
            )));
        }
        if responses.is_empty() {
            return Err(Error::InvalidData("aggregation part is empty".into()));
        }
        if labels.len() != m || labels.iter().any(|r| r.len() != responses.len()) {
            return Err(Error::InvalidData(format!(
                "label cache must be {m} x {}",
                responses.len()
            )));
        }
        let k = label_names.len();
        if labels.iter().flatten().chain(&responses).any(|&l| l >= k) {
            return Err(Error::InvalidData(format!("labels must lie in 0..{k}")));
        }
        Ok(Self {
            machines,
            labels,
            responses,
            alpha,
            label_names,
        })
    }

    pub fn machines(&self) -> &MachineSet {
        &self.machines
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn responses(&self) -> &[usize] {
        &self.responses
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn dim(&self) -> usize {
        self.machines.dim()
    }

    pub fn retained_indices(&self, x: &[f64]) -> Result<Vec<usize>> {
        Ok(self.retained_for_outputs(&self.machines.predict_labels(x)?))
    }

    pub fn retained_for_outputs(&self, outputs: &[usize]) -> Vec<usize> {
        retained_labels(&self.labels, outputs, self.alpha)
    }

    fn counts(&self, outputs: &[usize]) -> Vec<usize> {
        let kept = self.retained_for_outputs(outputs);
        if kept.is_empty() {
            label_counts(&self.responses, 0..self.responses.len(), self.n_labels())
        } else {
            label_counts(&self.responses, kept, self.n_labels())
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(crate::machines::plurality(
            &self.counts(&self.machines.predict_labels(x)?),
        ))
    }

    pub fn predict_from_outputs(&self, outputs: &[usize]) -> usize {
        crate::machines::plurality(&self.counts(outputs))
    }

    /// Vote shares over the label universe (global shares on an empty
    /// consensus).
    pub fn label_distribution(&self, x: &[f64]) -> Result<Vec<f64>> {
        let counts = self.counts(&self.machines.predict_labels(x)?);
        let total: usize = counts.iter().sum();
        Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn predict_batch(&self, queries: &Matrix) -> Result<Vec<usize>> {
        queries
            .iter_rows()
            .enumerate()
            .map(|(i, x)| self.predict(x).map_err(|e| e.at_row(i)))
            .collect()
    }
}
