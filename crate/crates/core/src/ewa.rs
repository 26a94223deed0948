//! Exponentially weighted aggregation.
//!
//! Each machine's risk is its mean squared error on the aggregation part;
//! weights are the Gibbs distribution `w_j ∝ exp(-risk_j / beta)` and the
//! aggregate predicts `Σ w_j r_j(x)`.

use serde::{Deserialize, Serialize};

use crate::data::{holdout_halves, Matrix, SplitDataset, Task};
use crate::error::{Error, Result};
use crate::machines::MachineSet;

/// `exp(-risk_j / beta)` normalized to the simplex. Exponents are shifted by
/// the smallest risk before exponentiating, so no term overflows and the
/// best machine's term is exactly 1.
pub fn gibbs_weights(risks: &[f64], beta: f64) -> Result<Vec<f64>> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if risks.is_empty() || risks.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter("risks must be finite and non-empty".into()));
    }
    let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let terms: Vec<f64> = risks.iter().map(|r| (-(r - min) / beta).exp()).collect();
    let total: f64 = terms.iter().sum();
    Ok(terms.into_iter().map(|t| t / total).collect())
}

fn mse(predictions: &[f64], responses: &[f64], rows: &[usize]) -> f64 {
    let mut sum = 0.0;
    for &i in rows {
        sum += (predictions[i] - responses[i]).powi(2);
    }
    sum / rows.len() as f64
}

/// `Σ w_j r_j`, clamped to the outputs' range so rounding never leaves the
/// convex hull.
fn combine(weights: &[f64], outputs: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (w, r) in weights.iter().zip(outputs) {
        sum += w * r;
    }
    let lo = outputs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    sum.clamp(lo, hi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EwaModel {
    machines: MachineSet,
    weights: Vec<f64>,
    beta: f64,
    risks: Vec<f64>,
}

impl EwaModel {
    pub fn fit(machines: MachineSet, split: &SplitDataset, beta: f64) -> Result<Self> {
        machines.require(Task::Regression)?;
        let y = split.aggregation.responses()?;
        let table = machines.real_table(&split.aggregation)?;
        let all: Vec<usize> = (0..y.len()).collect();
        let risks = table.iter().map(|p| mse(p, y, &all)).collect();
        Self::from_risks(machines, risks, beta)
    }

    /// Model from externally measured risks, one per machine.
    pub fn from_risks(machines: MachineSet, risks: Vec<f64>, beta: f64) -> Result<Self> {
        machines.require(Task::Regression)?;
        if risks.len() != machines.len() || risks.iter().any(|r| *r < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need {} non-negative risks, got {:?}",
                machines.len(),
                risks
            )));
        }
        let weights = gibbs_weights(&risks, beta)?;
        Ok(Self {
            machines,
            weights,
            beta,
            risks,
        })
    }

    pub fn machines(&self) -> &MachineSet {
        &self.machines
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn risks(&self) -> &[f64] {
        &self.risks
    }

    pub fn dim(&self) -> usize {
        self.machines.dim()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(combine(&self.weights, &self.machines.predict_real(x)?))
    }

    pub fn predict_from_outputs(&self, outputs: &[f64]) -> Result<f64> {
        if outputs.len() != self.weights.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} machine outputs, got {}",
                self.weights.len(),
                outputs.len()
            )));
        }
        Ok(combine(&self.weights, outputs))
    }

    pub fn predict_batch(&self, queries: &Matrix) -> Result<Vec<f64>> {
        queries
            .iter_rows()
            .enumerate()
            .map(|(i, x)| self.predict(x).map_err(|e| e.at_row(i)))
            .collect()
    }
}

/// 30 log-spaced temperatures from 1e-4 to 1e4.
pub fn default_beta_grid() -> Vec<f64> {
    (0..30).map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / 29.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaTuning {
    pub beta: f64,
    pub validation_mse: f64,
    /// `(beta, validation MSE)` in grid order.
    pub grid: Vec<(f64, f64)>,
}

/// Picks the temperature with the lowest validation MSE.
///
/// The aggregation part is split 50/50 by [`holdout_halves`]`(l, seed)`:
/// risks and weights come from the first half, the EWA is scored on the
/// second. Ties go to the smaller beta, then to the earlier grid entry.
pub fn tune_beta(machines: &MachineSet, split: &SplitDataset, grid: &[f64], seed: u64) -> Result<BetaTuning> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("beta grid is empty".into()));
    }
    machines.require(Task::Regression)?;
    let y = split.aggregation.responses()?;
    let table = machines.real_table(&split.aggregation)?;
    let (fit, val) = holdout_halves(y.len(), seed)?;
    let risks: Vec<f64> = table.iter().map(|p| mse(p, y, &fit)).collect();

    let mut results = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &beta in grid {
        let weights = gibbs_weights(&risks, beta)?;
        let mut sum = 0.0;
        for &i in &val {
            let outputs: Vec<f64> = table.iter().map(|p| p[i]).collect();
            sum += (combine(&weights, &outputs) - y[i]).powi(2);
        }
        let err = sum / val.len() as f64;
        results.push((beta, err));
        let better = match best {
            None => true,
            Some((b, e)) => err < e || (err == e && beta < b),
        };
        if better {
            best = Some((beta, err));
        }
    }
    let (beta, validation_mse) = best.expect("grid is non-empty");
    Ok(BetaTuning {
        beta,
        validation_mse,
        grid: results,
    })
}
