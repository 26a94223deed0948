//! COBRA consensus regression.
//!
//! Machines are trained on the first part of a split; their predictions on
//! the aggregation part `D_l` are cached at fit time. For a query `x`, an
//! aggregation point `X_i` is retained when at least `alpha` machines satisfy
//! `|r_j(X_i) - r_j(x)| <= epsilon`, and the prediction is the mean response
//! over retained points, summed left to right in ascending index order.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::data::{Matrix, SplitDataset, Task};
use crate::error::{Error, Result};
use crate::machines::MachineSet;

/// What `predict` does when no aggregation point reaches the quorum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Fail with [`Error::EmptyConsensus`].
    Error,
    /// Return the mean of all aggregation responses.
    #[default]
    GlobalMean,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CobraModel {
    machines: MachineSet,
    /// `predictions[j][i] = r_j(X_i)` over the aggregation part.
    predictions: Vec<Vec<f64>>,
    responses: Vec<f64>,
    epsilon: f64,
    alpha: usize,
    fallback: Fallback,
    #[serde(skip)]
    fallbacks: AtomicUsize,
}

impl Clone for CobraModel {
    fn clone(&self) -> Self {
        Self {
            machines: self.machines.clone(),
            predictions: self.predictions.clone(),
            responses: self.responses.clone(),
            epsilon: self.epsilon,
            alpha: self.alpha,
            fallback: self.fallback,
            fallbacks: AtomicUsize::new(self.fallback_count()),
        }
    }
}

pub(crate) fn check_params(epsilon: f64, alpha: usize, m: usize) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be a positive real, got {epsilon}"
        )));
    }
    if alpha < 1 || alpha > m {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in 1..={m}, got {alpha}"
        )));
    }
    Ok(())
}

/// Aggregation indices retained for machine outputs `outputs` (`r_j(x)`).
pub(crate) fn retained(predictions: &[Vec<f64>], outputs: &[f64], epsilon: f64, alpha: usize) -> Vec<usize> {
    let l = predictions.first().map_or(0, Vec::len);
    (0..l)
        .filter(|&i| {
            predictions
                .iter()
                .zip(outputs)
                .filter(|(row, r)| (row[i] - *r).abs() <= epsilon)
                .count()
                >= alpha
        })
        .collect()
}

/// Mean of `responses` over `indices`, or `None` when the set is empty.
pub(crate) fn mean_over(responses: &[f64], indices: &[usize]) -> Option<f64> {
    if indices.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for &i in indices {
        sum += responses[i];
    }
    Some(sum / indices.len() as f64)
}

pub(crate) fn global_mean(responses: &[f64]) -> f64 {
    let mut sum = 0.0;
    for v in responses {
        sum += v;
    }
    sum / responses.len() as f64
}

impl CobraModel {
    /// Caches every machine's predictions on the aggregation part of `split`.
    /// The machines must have been trained on the training part only.
    pub fn fit(machines: MachineSet, split: &SplitDataset, epsilon: f64, alpha: usize) -> Result<Self> {
        machines.require(Task::Regression)?;
        let agg = &split.aggregation;
        let responses = agg.responses()?.to_vec();
        let predictions = machines.real_table(agg)?;
        Self::from_predictions(machines, predictions, responses, epsilon, alpha)
    }

    /// Builds a model from an already computed `M x l` prediction cache.
    pub fn from_predictions(
        machines: MachineSet,
        predictions: Vec<Vec<f64>>,
        responses: Vec<f64>,
        epsilon: f64,
        alpha: usize,
    ) -> Result<Self> {
        machines.require(Task::Regression)?;
        check_params(epsilon, alpha, machines.len())?;
        if responses.is_empty() {
            return Err(Error::InvalidData("aggregation part is empty".into()));
        }
        if predictions.len() != machines.len() || predictions.iter().any(|r| r.len() != responses.len()) {
            return Err(Error::InvalidData(format!(
                "prediction cache must be {} x {}",
                machines.len(),
                responses.len()
            )));
        }
        if predictions.iter().flatten().chain(&responses).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("prediction cache holds non-finite values".into()));
        }
        Ok(Self {
            machines,
            predictions,
            responses,
            epsilon,
            alpha,
            fallback: Fallback::default(),
            fallbacks: AtomicUsize::new(0),
        })
    }

    pub fn with_fallback(mut self, fallback: Fallback) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn machines(&self) -> &MachineSet {
        &self.machines
    }

    pub fn predictions(&self) -> &[Vec<f64>] {
        &self.predictions
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn fallback(&self) -> Fallback {
        self.fallback
    }

    pub fn dim(&self) -> usize {
        self.machines.dim()
    }

    /// Number of predictions so far that hit an empty consensus and used the
    /// global-mean fallback.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    pub fn retained_indices(&self, x: &[f64]) -> Result<Vec<usize>> {
        let outputs = self.machines.predict_real(x)?;
        Ok(self.retained_for_outputs(&outputs))
    }

    /// Consensus set for precomputed machine outputs `r_j(x)`, in roster order.
    pub fn retained_for_outputs(&self, outputs: &[f64]) -> Vec<usize> {
        retained(&self.predictions, outputs, self.epsilon, self.alpha)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let outputs = self.machines.predict_real(x)?;
        self.predict_from_outputs(&outputs)
    }

    pub fn predict_from_outputs(&self, outputs: &[f64]) -> Result<f64> {
        if outputs.len() != self.machines.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} machine outputs, got {}",
                self.machines.len(),
                outputs.len()
            )));
        }
        let kept = self.retained_for_outputs(outputs);
        match mean_over(&self.responses, &kept) {
            Some(v) => Ok(v),
            None => match self.fallback {
                Fallback::Error => Err(Error::EmptyConsensus),
                Fallback::GlobalMean => {
                    self.fallbacks.fetch_add(1, Ordering::Relaxed);
                    Ok(global_mean(&self.responses))
                }
            },
        }
    }

    /// Row-wise [`CobraModel::predict`]; the first failing row is reported
    /// with its index.
    pub fn predict_batch(&self, queries: &Matrix) -> Result<Vec<f64>> {
        queries
            .iter_rows()
            .enumerate()
            .map(|(i, x)| self.predict(x).map_err(|e| e.at_row(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::machines::{Machine, Model, Output, PredictionTable};
    use crate::rng::XorShift64Star;
    use proptest::prelude::*;

    /// Roster of table machines over 1-D inputs `0..l` and one query at `l`.
    fn table_model(cache: Vec<Vec<f64>>, query: Vec<f64>, responses: Vec<f64>, eps: f64, alpha: usize) -> CobraModel {
        let l = responses.len();
        let pts = Matrix::new(l + 1, 1, (0..=l).map(|i| i as f64).collect()).unwrap();
        let machines = cache
            .iter()
            .zip(&query)
            .enumerate()
            .map(|(j, (row, q))| {
                let mut outs: Vec<Output> = row.iter().map(|&v| Output::Real(v)).collect();
                outs.push(Output::Real(*q));
                Machine::new(format!("m{j}"), Model::Table(PredictionTable::new(&pts, outs).unwrap()))
            })
            .collect();
        CobraModel::from_predictions(MachineSet::new(machines).unwrap(), cache, responses, eps, alpha).unwrap()
    }

    /// Machine-major collection followed by a per-point quorum count.
    #[allow(clippy::needless_range_loop)]
    fn literal_retained(cache: &[Vec<f64>], outputs: &[f64], eps: f64, alpha: usize) -> Vec<usize> {
        let l = cache[0].len();
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for (j, row) in cache.iter().enumerate() {
            let mut set = Vec::new();
            for i in 0..l {
                if (row[i] - outputs[j]).abs() <= eps {
                    set.push(i);
                }
            }
            sets.push(set);
        }
        (0..l)
            .filter(|i| sets.iter().filter(|s| s.contains(i)).count() >= alpha)
            .collect()
    }

    #[test]
    fn huge_epsilon_keeps_everything() {
        let m = table_model(
            vec![vec![1.0, 5.0, -3.0], vec![0.0, 2.0, 9.0]],
            vec![0.0, 0.0],
            vec![1.0, 2.0, 3.0],
            1e9,
            2,
        );
        assert_eq!(m.retained_indices(&[3.0]).unwrap(), vec![0, 1, 2]);
        assert_eq!(m.predict(&[3.0]).unwrap(), 2.0);
    }

    #[test]
    fn single_machine_direct_filter() {
        let m = table_model(vec![vec![1.0, 2.0, 3.0]], vec![2.0], vec![10.0, 20.0, 30.0], 0.5, 1);
        assert_eq!(m.retained_indices(&[3.0]).unwrap(), vec![1]);
        assert_eq!(m.predict(&[3.0]).unwrap(), 20.0);
    }

    #[test]
    fn boundary_distance_is_retained() {
        let m = table_model(vec![vec![1.0, 2.5]], vec![2.0], vec![1.0, 2.0], 0.5, 1);
        assert_eq!(m.retained_indices(&[2.0]).unwrap(), vec![1]);
    }

    #[test]
    fn full_average() {
        let m = table_model(vec![vec![0.0; 4]], vec![0.0], vec![1.0, 2.0, 3.0, 4.0], 1.0, 1);
        assert_eq!(m.predict(&[4.0]).unwrap(), 2.5);
    }

    #[test]
    fn empty_consensus_policies() {
        let m = table_model(vec![vec![0.0, 1.0]], vec![50.0], vec![1.0, 4.0], 0.1, 1);
        assert_eq!(m.predict(&[2.0]).unwrap(), 2.5);
        assert_eq!(m.fallback_count(), 1);
        let strict = m.clone().with_fallback(Fallback::Error);
        assert!(matches!(strict.predict(&[2.0]), Err(Error::EmptyConsensus)));
    }

    #[test]
    fn parameter_errors() {
        let cache = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        let make = |eps, alpha| {
            let pts = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
            let ms = (0..2)
                .map(|j| {
                    let t = PredictionTable::new(&pts, vec![Output::Real(0.0), Output::Real(1.0)]).unwrap();
                    Machine::new(format!("m{j}"), Model::Table(t))
                })
                .collect();
            CobraModel::from_predictions(MachineSet::new(ms).unwrap(), cache.clone(), vec![1.0, 2.0], eps, alpha)
        };
        assert!(make(0.5, 3).is_err());
        assert!(make(0.5, 0).is_err());
        assert!(make(0.0, 1).is_err());
        assert!(make(f64::INFINITY, 1).is_err());
        assert!(make(0.5, 2).is_ok());
    }

    #[test]
    fn rejects_classification_machines() {
        let d = Dataset::classification(
            Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
            vec![0, 1, 0, 1],
            2,
        )
        .unwrap();
        let s = crate::data::split(&d, 0.5, 1).unwrap();
        let m = crate::machines::train_knn(&s.training, 1).unwrap();
        let set = MachineSet::new(vec![Machine::new("knn", Model::Knn(m))]).unwrap();
        assert!(matches!(
            CobraModel::fit(set, &s, 1.0, 1),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn batch_matches_single_and_reports_rows() {
        let m = table_model(vec![vec![1.0, 2.0, 3.0]], vec![2.0], vec![10.0, 20.0, 30.0], 1.0, 1);
        assert!(m.predict_batch(&Matrix::empty(1)).unwrap().is_empty());
        let q = Matrix::new(2, 1, vec![3.0, 0.0]).unwrap();
        assert_eq!(
            m.predict_batch(&q).unwrap(),
            vec![m.predict(&[3.0]).unwrap(), m.predict(&[0.0]).unwrap()]
        );
        let bad = Matrix::new(2, 1, vec![3.0, 99.0]).unwrap();
        assert!(matches!(m.predict_batch(&bad), Err(Error::Row { row: 1, .. })));
        let wide = Matrix::new(1, 2, vec![3.0, 1.0]).unwrap();
        match m.predict_batch(&wide) {
            Err(Error::Row { row: 0, source }) => {
                assert!(matches!(*source, Error::DimensionMismatch { expected: 1, found: 2 }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn random_cache(seed: u64, m: usize, l: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut rng = XorShift64Star::new(seed);
        let cache = (0..m)
            .map(|_| (0..l).map(|_| rng.uniform(-2.0, 2.0)).collect())
            .collect();
        let query = (0..m).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let y = (0..l).map(|_| rng.normal()).collect();
        (cache, query, y)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_literal_double_loop(seed in any::<u64>(), m in 1usize..5, l in 1usize..30, eps in 0.01f64..4.0, a in 0usize..4) {
            let (cache, q, y) = random_cache(seed, m, l);
            let alpha = 1 + a % m;
            let model = table_model(cache.clone(), q.clone(), y, eps, alpha);
            prop_assert_eq!(model.retained_indices(&[l as f64]).unwrap(), literal_retained(&cache, &q, eps, alpha));
        }

        #[test]
        fn epsilon_monotone_alpha_antitone(seed in any::<u64>(), m in 1usize..5, e1 in 0.01f64..2.0, de in 0.0f64..2.0, a1 in 1usize..5, da in 0usize..4) {
            let (cache, q, _) = random_cache(seed, m, 25);
            let a1 = a1.min(m);
            let a2 = (a1 + da).min(m);
            let small = retained(&cache, &q, e1, a1);
            let large = retained(&cache, &q, e1 + de, a1);
            prop_assert!(small.iter().all(|i| large.contains(i)));
            let strict = retained(&cache, &q, e1, a2);
            prop_assert!(strict.iter().all(|i| small.contains(i)));
        }

        #[test]
        fn prediction_within_retained_range(seed in any::<u64>(), m in 1usize..5, eps in 0.1f64..3.0) {
            let (cache, q, y) = random_cache(seed, m, 20);
            let kept = retained(&cache, &q, eps, 1);
            if let Some(p) = mean_over(&y, &kept) {
                let lo = kept.iter().map(|&i| y[i]).fold(f64::INFINITY, f64::min);
                let hi = kept.iter().map(|&i| y[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo <= p && p <= hi);
            }
        }

        #[test]
        fn machine_order_is_irrelevant(seed in any::<u64>(), eps in 0.1f64..3.0, alpha in 1usize..4) {
            let (cache, q, y) = random_cache(seed, 3, 20);
            let perm = [2usize, 0, 1];
            let pc: Vec<Vec<f64>> = perm.iter().map(|&j| cache[j].clone()).collect();
            let pq: Vec<f64> = perm.iter().map(|&j| q[j]).collect();
            let a = table_model(cache, q, y.clone(), eps, alpha);
            let b = table_model(pc, pq, y, eps, alpha);
            prop_assert_eq!(a.retained_indices(&[20.0]).unwrap(), b.retained_indices(&[20.0]).unwrap());
            prop_assert_eq!(a.predict(&[20.0]).unwrap().to_bits(), b.predict(&[20.0]).unwrap().to_bits());
        }
    }
}
