//! Datasets, CSV ingestion and the seeded machine/aggregation split.
//!
//! CSV dialect: comma delimiter, no quoting, `.` decimal point. The first row
//! is treated as a header when none of its cells parses as a number. Feature
//! cells must parse as finite reals. For classification the response column
//! may hold arbitrary strings; distinct values are mapped to dense labels
//! `0..K` in order of first occurrence.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::XorShift64Star;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

/// Dense row-major matrix of reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidData(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// An `rows x 0`-safe empty matrix with a fixed column count.
    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Responses attached to a [`Dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Real(Vec<f64>),
    Labels {
        labels: Vec<usize>,
        /// Original response strings, indexed by label.
        names: Vec<String>,
    },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(y) => y.len(),
            Targets::Labels { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Targets::Real(_) => Task::Regression,
            Targets::Labels { .. } => Task::Classification,
        }
    }

    fn select(&self, indices: &[usize]) -> Self {
        match self {
            Targets::Real(y) => Targets::Real(indices.iter().map(|&i| y[i]).collect()),
            Targets::Labels { labels, names } => Targets::Labels {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                names: names.clone(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    targets: Targets,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Targets) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidData("dataset has no feature columns".into()));
        }
        if targets.len() != features.rows() {
            return Err(Error::InvalidData(format!(
                "{} responses for {} feature rows",
                targets.len(),
                features.rows()
            )));
        }
        if let Some(i) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature at row {}, column {}",
                i / features.cols(),
                i % features.cols()
            )));
        }
        match &targets {
            Targets::Real(y) => {
                if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                    return Err(Error::InvalidData(format!("non-finite response at row {i}")));
                }
            }
            Targets::Labels { labels, names } => {
                if let Some(&l) = labels.iter().find(|&&l| l >= names.len()) {
                    return Err(Error::InvalidData(format!(
                        "label {l} outside the universe of {} labels",
                        names.len()
                    )));
                }
            }
        }
        Ok(Self {
            features,
            targets,
            column_names: None,
        })
    }

    pub fn regression(features: Matrix, responses: Vec<f64>) -> Result<Self> {
        Self::new(features, Targets::Real(responses))
    }

    /// Classification dataset whose label universe is `0..n_labels`, named by
    /// the labels' decimal representation.
    pub fn classification(features: Matrix, labels: Vec<usize>, n_labels: usize) -> Result<Self> {
        let names = (0..n_labels).map(|l| l.to_string()).collect();
        Self::new(features, Targets::Labels { labels, names })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::InvalidData(format!(
                "{} column names for {} features",
                names.len(),
                self.dim()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.targets.task()
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn responses(&self) -> Result<&[f64]> {
        match &self.targets {
            Targets::Real(y) => Ok(y),
            Targets::Labels { .. } => Err(Error::InvalidData("expected real responses, found class labels".into())),
        }
    }

    pub fn labels(&self) -> Result<&[usize]> {
        match &self.targets {
            Targets::Labels { labels, .. } => Ok(labels),
            Targets::Real(_) => Err(Error::InvalidData("expected class labels, found real responses".into())),
        }
    }

    pub fn label_names(&self) -> Option<&[String]> {
        match &self.targets {
            Targets::Labels { names, .. } => Some(names),
            Targets::Real(_) => None,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.label_names().map_or(0, |n| n.len())
    }

    /// Rows at `indices`, in the given order. Panics on out-of-range indices.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: self.targets.select(indices),
            column_names: self.column_names.clone(),
        }
    }

    /// Re-indexes class labels onto the label universe `names` (e.g. that of
    /// a training file). Fails on a label absent from `names`.
    pub fn with_label_universe(self, names: &[String]) -> Result<Dataset> {
        let Targets::Labels { labels, names: own } = &self.targets else {
            return Err(Error::InvalidData("expected class labels, found real responses".into()));
        };
        let map = own
            .iter()
            .map(|n| {
                names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::InvalidData(format!("label {n:?} does not occur in the training data")))
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = labels.iter().map(|&l| map[l]).collect();
        Ok(Dataset {
            targets: Targets::Labels {
                labels,
                names: names.to_vec(),
            },
            ..self
        })
    }

    /// Writes the dataset as CSV: feature columns then the response column.
    pub fn to_csv_string(&self, response_name: &str) -> String {
        let mut out = String::new();
        let names: Vec<String> = match &self.column_names {
            Some(n) => n.clone(),
            None => (0..self.dim()).map(|j| format!("x{j}")).collect(),
        };
        out.push_str(&names.join(","));
        out.push(',');
        out.push_str(response_name);
        out.push('\n');
        for i in 0..self.len() {
            for v in self.row(i) {
                out.push_str(&v.to_string());
                out.push(',');
            }
            match &self.targets {
                Targets::Real(y) => out.push_str(&y[i].to_string()),
                Targets::Labels { labels, names } => out.push_str(&names[labels[i]]),
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, response_name: &str) -> Result<()> {
        std::fs::write(path, self.to_csv_string(response_name)).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Identifies the response column by header name or zero-based index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl From<&str> for ColumnRef {
    /// Header names take precedence at load time; a bare integer that matches
    /// no header is read as an index.
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

impl From<usize> for ColumnRef {
    fn from(i: usize) -> Self {
        ColumnRef::Index(i)
    }
}

pub(crate) struct RawTable {
    pub(crate) header: Option<Vec<String>>,
    pub(crate) rows: Vec<Vec<String>>,
    /// 1-based file line of the first data row.
    pub(crate) first_line: usize,
    pub(crate) width: usize,
}

pub(crate) fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub(crate) fn read_table(path: &Path) -> Result<RawTable> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .quoting(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(records.len() + 1, |p| p.line() as usize);
        records.push((line, rec.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    let mut iter = records.into_iter().peekable();
    let header = match iter.peek() {
        Some((_, first)) if first.iter().all(|c| parse_number(c).is_none()) => iter.next().map(|(_, h)| h),
        _ => None,
    };
    let mut rows = Vec::new();
    let mut first_line = header.as_ref().map_or(1, |_| 2);
    let mut width = header.as_ref().map_or(0, |h| h.len());
    for (k, (line, cells)) in iter.enumerate() {
        if k == 0 {
            first_line = line;
            if header.is_none() {
                width = cells.len();
            }
        }
        if cells.len() != width {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: line,
                found: cells.len(),
                expected: width,
            });
        }
        rows.push(cells);
    }
    Ok(RawTable {
        header,
        rows,
        first_line,
        width,
    })
}

impl RawTable {
    pub(crate) fn column_name(&self, j: usize) -> String {
        self.header.as_ref().map_or_else(|| j.to_string(), |h| h[j].clone())
    }

    fn resolve(&self, col: &ColumnRef) -> Result<usize> {
        let by_index = |i: usize| (i < self.width).then_some(i);
        let found = match col {
            ColumnRef::Index(i) => by_index(*i),
            ColumnRef::Name(name) => self
                .header
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == name))
                .or_else(|| name.parse::<usize>().ok().and_then(by_index)),
        };
        found.ok_or_else(|| {
            Error::MissingColumn(match col {
                ColumnRef::Index(i) => i.to_string(),
                ColumnRef::Name(n) => n.clone(),
            })
        })
    }

    fn parse_features(&self, path: &Path, skip: Option<usize>) -> Result<Matrix> {
        let cols: Vec<usize> = (0..self.width).filter(|&j| Some(j) != skip).collect();
        let mut data = Vec::with_capacity(self.rows.len() * cols.len());
        for (k, row) in self.rows.iter().enumerate() {
            for &j in &cols {
                let v = parse_number(&row[j]).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    row: self.first_line + k,
                    column: self.column_name(j),
                    cell: row[j].clone(),
                })?;
                data.push(v);
            }
        }
        Matrix::new(self.rows.len(), cols.len(), data)
    }
}

/// Loads a labelled dataset. The response column is removed from the
/// features; row order is preserved.
pub fn load_csv(path: &Path, response: &ColumnRef, task: Task) -> Result<Dataset> {
    let table = read_table(path)?;
    if table.rows.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let rc = table.resolve(response)?;
    let features = table.parse_features(path, Some(rc))?;
    let targets = match task {
        Task::Regression => {
            let mut y = Vec::with_capacity(table.rows.len());
            for (k, row) in table.rows.iter().enumerate() {
                y.push(parse_number(&row[rc]).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    row: table.first_line + k,
                    column: table.column_name(rc),
                    cell: row[rc].clone(),
                })?);
            }
            Targets::Real(y)
        }
        Task::Classification => {
            let mut names: Vec<String> = Vec::new();
            let labels = table
                .rows
                .iter()
                .map(|row| {
                    let cell = &row[rc];
                    match names.iter().position(|n| n == cell) {
                        Some(l) => l,
                        None => {
                            names.push(cell.clone());
                            names.len() - 1
                        }
                    }
                })
                .collect();
            Targets::Labels { labels, names }
        }
    };
    let dataset = Dataset::new(features, targets)?;
    match &table.header {
        Some(h) => {
            let names = h
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != rc)
                .map(|(_, n)| n.clone())
                .collect();
            dataset.with_column_names(names)
        }
        None => Ok(dataset),
    }
}

/// Loads a feature-only CSV (query points). An empty file yields a matrix
/// with zero rows; `expected_cols` fixes its column count in that case.
pub fn load_features_csv(path: &Path, expected_cols: usize) -> Result<Matrix> {
    let table = read_table(path)?;
    if table.rows.is_empty() {
        return Ok(Matrix::empty(expected_cols));
    }
    table.parse_features(path, None)
}

/// Loads a CSV whose every column is numeric, returning the header (if any)
/// and the full matrix.
pub fn load_numeric_csv(path: &Path) -> Result<(Option<Vec<String>>, Matrix)> {
    let table = read_table(path)?;
    if table.rows.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let m = table.parse_features(path, None)?;
    Ok((table.header, m))
}

/// Disjoint partition of a dataset into the machine-training part and the
/// aggregation part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub training: Dataset,
    pub aggregation: Dataset,
    /// Original row indices of `training`, ascending.
    pub training_indices: Vec<usize>,
    /// Original row indices of `aggregation`, ascending.
    pub aggregation_indices: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

/// Number of rows sent to the machine-training part.
pub fn training_size(n: usize, ratio: f64) -> usize {
    let k = (ratio * n as f64).round() as usize;
    k.clamp(1, n - 1)
}

/// Splits `data` into a machine-training part of
/// `max(1, min(n-1, round(ratio*n)))` rows and an aggregation part holding the
/// rest. Rows are assigned by a [`XorShift64Star`] permutation seeded with
/// `seed`: the first `k` permuted indices form the training part. Both parts
/// keep ascending original row order.
pub fn split(data: &Dataset, ratio: f64, seed: u64) -> Result<SplitDataset> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidData(format!("splitting needs at least 2 rows, got {n}")));
    }
    let (mut train, mut agg) = partition_indices(n, ratio, seed);
    train.sort_unstable();
    agg.sort_unstable();
    Ok(SplitDataset {
        training: data.subset(&train),
        aggregation: data.subset(&agg),
        training_indices: train,
        aggregation_indices: agg,
        ratio,
        seed,
    })
}

/// Unsorted index halves `(first k of the permutation, remainder)`.
pub(crate) fn partition_indices(n: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let perm = XorShift64Star::new(seed).permutation(n);
    let k = training_size(n, ratio);
    (perm[..k].to_vec(), perm[k..].to_vec())
}

/// Seeded 50/50 partition of `0..n` used for inner validation splits
/// (fit half, validation half), both ascending. Requires `n >= 2`.
pub fn holdout_halves(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidData(format!(
            "a validation split needs at least 2 aggregation rows, got {n}"
        )));
    }
    let (mut a, mut b) = partition_indices(n, 0.5, seed);
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}
