//! Constituent machines.
//!
//! Anything that maps a feature vector to a real value or a class label can
//! act as a machine. Built-in learners cover the default rosters (ridge,
//! lasso, CART trees, k-NN, bagged trees, nearest centroid); external models
//! plug in either as [`PredictionTable`]s of precomputed outputs or, in
//! process, through the [`Predictor`] trait.

mod bagging;
mod centroid;
mod external;
mod knn;
mod linear;
mod spec;
mod tree;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};

pub use bagging::{bootstrap_indices, train_bagged_trees, BaggedTrees, NO_BOOTSTRAP};
pub use centroid::{train_nearest_centroid, NearestCentroid};
pub use external::{load_prediction_tables, PredictionTable};
pub use knn::{train_knn, Knn};
pub use linear::{soft_threshold, train_lasso, train_ridge, LinearModel, LinearPenalty};
pub use spec::{train_roster, MachineSpec};
pub use tree::{train_tree, Node, Tree};

/// A single machine output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Real(f64),
    Label(usize),
}

impl Output {
    pub fn task(self) -> Task {
        match self {
            Output::Real(_) => Task::Regression,
            Output::Label(_) => Task::Classification,
        }
    }

    /// Numeric view; labels map to their integer value.
    pub fn as_f64(self) -> f64 {
        match self {
            Output::Real(v) => v,
            Output::Label(l) => l as f64,
        }
    }
}

/// A fitted predictor. Implementations must be pure: the same input always
/// yields the same output.
pub trait Predictor: fmt::Debug + Send + Sync {
    fn task(&self) -> Task;

    /// Number of features expected by `predict`.
    fn dim(&self) -> usize;

    /// Called only with inputs of length [`Predictor::dim`].
    fn predict(&self, x: &[f64]) -> Result<Output>;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Tree(Tree),
    Knn(Knn),
    BaggedTrees(BaggedTrees),
    NearestCentroid(NearestCentroid),
    Table(PredictionTable),
    /// In-process user predictor; cannot be persisted.
    #[serde(skip)]
    Custom(Arc<dyn Predictor>),
}

impl Model {
    fn predictor(&self) -> &dyn Predictor {
        match self {
            Model::Linear(m) => m,
            Model::Tree(m) => m,
            Model::Knn(m) => m,
            Model::BaggedTrees(m) => m,
            Model::NearestCentroid(m) => m,
            Model::Table(m) => m,
            Model::Custom(m) => m.as_ref(),
        }
    }
}

/// A named, fitted machine.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Machine {
    name: String,
    model: Model,
}

impl Machine {
    pub fn new(name: impl Into<String>, model: Model) -> Self {
        Self {
            name: name.into(),
            model,
        }
    }

    pub fn custom(name: impl Into<String>, predictor: Arc<dyn Predictor>) -> Self {
        Self::new(name, Model::Custom(predictor))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn task(&self) -> Task {
        self.model.predictor().task()
    }

    pub fn dim(&self) -> usize {
        self.model.predictor().dim()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Output> {
        let p = self.model.predictor();
        if x.len() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: x.len(),
            });
        }
        p.predict(x)
    }

    pub fn predict_real(&self, x: &[f64]) -> Result<f64> {
        match self.predict(x)? {
            Output::Real(v) => Ok(v),
            Output::Label(_) => Err(self.kind_error(Task::Regression)),
        }
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        match self.predict(x)? {
            Output::Label(l) => Ok(l),
            Output::Real(_) => Err(self.kind_error(Task::Classification)),
        }
    }

    fn kind_error(&self, expected: Task) -> Error {
        Error::KindMismatch {
            machine: self.name.clone(),
            expected,
            found: self.task(),
        }
    }
}

/// Ordered roster of machines sharing one task and input dimension.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<Machine>", into = "Vec<Machine>")]
pub struct MachineSet {
    machines: Vec<Machine>,
}

impl MachineSet {
    pub fn new(machines: Vec<Machine>) -> Result<Self> {
        let first = machines
            .first()
            .ok_or_else(|| Error::InvalidParameter("machine roster is empty".into()))?;
        let (task, dim) = (first.task(), first.dim());
        let mut seen = HashSet::new();
        for m in &machines {
            if !seen.insert(m.name()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate machine name {:?}",
                    m.name()
                )));
            }
            if m.task() != task {
                return Err(Error::KindMismatch {
                    machine: m.name().to_string(),
                    expected: task,
                    found: m.task(),
                });
            }
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
        }
        Ok(Self { machines })
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    pub fn task(&self) -> Task {
        self.machines[0].task()
    }

    pub fn dim(&self) -> usize {
        self.machines[0].dim()
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn names(&self) -> Vec<&str> {
        self.machines.iter().map(Machine::name).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Machine> {
        self.machines.iter()
    }

    /// Sub-roster with the machines at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.machines[i].clone()).collect())
    }

    pub fn require(&self, task: Task) -> Result<()> {
        match self.machines.iter().find(|m| m.task() != task) {
            Some(m) => Err(Error::KindMismatch {
                machine: m.name().to_string(),
                expected: task,
                found: m.task(),
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `r_j(x)` for every machine, in roster order.
    pub fn predict_real(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        self.machines.iter().map(|m| m.predict_real(x)).collect()
    }

    pub fn predict_labels(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        self.machines.iter().map(|m| m.predict_label(x)).collect()
    }

    /// Machine-major `M x n` table of real predictions over the dataset rows.
    pub fn real_table(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        self.machines
            .iter()
            .map(|m| {
                (0..data.len())
                    .map(|i| m.predict_real(data.row(i)).map_err(|e| e.at_row(i)))
                    .collect()
            })
            .collect()
    }

    pub fn label_table(&self, data: &Dataset) -> Result<Vec<Vec<usize>>> {
        self.machines
            .iter()
            .map(|m| {
                (0..data.len())
                    .map(|i| m.predict_label(data.row(i)).map_err(|e| e.at_row(i)))
                    .collect()
            })
            .collect()
    }
}

impl TryFrom<Vec<Machine>> for MachineSet {
    type Error = Error;

    fn try_from(machines: Vec<Machine>) -> Result<Self> {
        Self::new(machines)
    }
}

impl From<MachineSet> for Vec<Machine> {
    fn from(set: MachineSet) -> Self {
        set.machines
    }
}

pub(crate) fn require_task(data: &Dataset, task: Task, what: &str) -> Result<()> {
    if data.task() != task {
        return Err(Error::KindMismatch {
            machine: what.to_string(),
            expected: data.task(),
            found: task,
        });
    }
    Ok(())
}

/// Majority label among `counts`; ties go to the smaller label.
pub fn plurality(counts: &[usize]) -> usize {
    let mut best = 0;
    for (l, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = l;
        }
    }
    best
}

/// Mean in ascending slice order.
pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}
