use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file contains no data rows")]
    EmptyFile { path: PathBuf },

    #[error("{path}: row {row}, column {column:?}: cannot parse {cell:?} as a finite number")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        cell: String,
    },

    #[error("{path}: row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("response column {0:?} not found")]
    MissingColumn(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("machine {machine:?} is a {found} machine, expected {expected}")]
    KindMismatch {
        machine: String,
        expected: crate::Task,
        found: crate::Task,
    },

    #[error("singular normal equations (lambda = {lambda}); use lambda > 0")]
    SingularSystem { lambda: f64 },

    #[error("machine {machine:?} has no prediction recorded for the query point")]
    UnknownPoint { machine: String },

    #[error("no aggregation point reached the consensus quorum")]
    EmptyConsensus,

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("archive: {0}")]
    Archive(String),
}

impl Error {
    pub(crate) fn at_row(self, row: usize) -> Self {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }
}
