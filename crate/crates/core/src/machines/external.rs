use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Machine, Model, Output, Predictor};
use crate::data::{parse_number, read_table, Dataset, Matrix, Task};
use crate::error::{Error, Result};

/// Precomputed outputs of an external model, keyed by exact feature vector.
///
/// Lets any model, whatever produced it, take part in aggregation: record its
/// predictions on the aggregation rows (and on every point to be queried
/// later) and wrap them as a table. Querying an unrecorded point is an error.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "TableRepr", into = "TableRepr")]
pub struct PredictionTable {
    task: Task,
    dim: usize,
    entries: Vec<(Vec<f64>, Output)>,
    index: HashMap<Vec<u64>, usize>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    task: Task,
    dim: usize,
    entries: Vec<(Vec<f64>, Output)>,
}

impl From<TableRepr> for PredictionTable {
    fn from(r: TableRepr) -> Self {
        let index = r.entries.iter().enumerate().map(|(i, (x, _))| (key(x), i)).collect();
        Self {
            task: r.task,
            dim: r.dim,
            entries: r.entries,
            index,
        }
    }
}

impl From<PredictionTable> for TableRepr {
    fn from(t: PredictionTable) -> Self {
        Self {
            task: t.task,
            dim: t.dim,
            entries: t.entries,
        }
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    // `+ 0.0` folds -0.0 onto 0.0.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl PredictionTable {
    /// One entry per row of `points`. Repeated points must carry identical
    /// outputs.
    pub fn new(points: &Matrix, outputs: Vec<Output>) -> Result<Self> {
        if points.rows() != outputs.len() {
            return Err(Error::InvalidData(format!(
                "{} outputs for {} points",
                outputs.len(),
                points.rows()
            )));
        }
        let task = outputs
            .first()
            .map(|o| o.task())
            .ok_or_else(|| Error::InvalidData("prediction table is empty".into()))?;
        let mut entries: Vec<(Vec<f64>, Output)> = Vec::with_capacity(outputs.len());
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (row, out) in points.iter_rows().zip(outputs) {
            if out.task() != task || !out.as_f64().is_finite() {
                return Err(Error::InvalidData(format!(
                    "prediction table mixes output kinds or holds a non-finite value: {out:?}"
                )));
            }
            match index.get(&key(row)) {
                Some(&i) if entries[i].1 != out => {
                    return Err(Error::InvalidData(format!(
                        "point {row:?} recorded with two different outputs"
                    )))
                }
                Some(_) => {}
                None => {
                    index.insert(key(row), entries.len());
                    entries.push((row.to_vec(), out));
                }
            }
        }
        Ok(Self {
            task,
            dim: points.cols(),
            entries,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Predictor for PredictionTable {
    fn task(&self) -> Task {
        self.task
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Result<Output> {
        self.index
            .get(&key(x))
            .map(|&i| self.entries[i].1)
            .ok_or_else(|| Error::UnknownPoint {
                machine: "prediction table".into(),
            })
    }
}

/// Reads external predictions for every row of `data`: one CSV column per
/// machine, row `i` holding that machine's output for data row `i`. Header
/// cells name the machines (`external_<j>` without a header). Classification
/// outputs are label strings from the dataset's label mapping.
pub fn load_prediction_tables(path: &Path, data: &Dataset) -> Result<Vec<Machine>> {
    let table = read_table(path)?;
    if table.rows.len() != data.len() {
        return Err(Error::InvalidData(format!(
            "{}: {} prediction rows for {} data rows",
            path.display(),
            table.rows.len(),
            data.len()
        )));
    }
    (0..table.width)
        .map(|j| {
            let outputs = table
                .rows
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    let cell = &row[j];
                    let parsed = match data.label_names() {
                        None => parse_number(cell).map(Output::Real),
                        Some(names) => names.iter().position(|n| n == cell).map(Output::Label),
                    };
                    parsed.ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        row: table.first_line + k,
                        column: table.column_name(j),
                        cell: cell.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let name = match &table.header {
                Some(h) => h[j].clone(),
                None => format!("external_{j}"),
            };
            let t = PredictionTable::new(data.features(), outputs)?;
            Ok(Machine::new(name, Model::Table(t)))
        })
        .collect()
}
