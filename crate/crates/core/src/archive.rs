//! Versioned JSON persistence for fitted aggregates.
//!
//! ```json
//! { "format_version": 1, "kind": "cobra", "split": {...}, "feature_names": [...],
//!   "response_name": "y", "payload": { ...model fields... } }
//! ```
//!
//! Loading re-validates the payload through the model constructors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier_cobra::ClassifierCobraModel;
use crate::cobra::{CobraModel, Fallback};
use crate::data::{Matrix, Task};
use crate::error::{Error, Result};
use crate::ewa::EwaModel;
use crate::machines::MachineSet;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cobra,
    Ewa,
    ClassifierCobra,
}

#[derive(Debug)]
pub enum ArchivedModel {
    Cobra(CobraModel),
    Ewa(EwaModel),
    ClassifierCobra(ClassifierCobraModel),
}

impl ArchivedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            ArchivedModel::Cobra(_) => ModelKind::Cobra,
            ArchivedModel::Ewa(_) => ModelKind::Ewa,
            ArchivedModel::ClassifierCobra(_) => ModelKind::ClassifierCobra,
        }
    }

    pub fn machines(&self) -> &MachineSet {
        match self {
            ArchivedModel::Cobra(m) => m.machines(),
            ArchivedModel::Ewa(m) => m.machines(),
            ArchivedModel::ClassifierCobra(m) => m.machines(),
        }
    }

    pub fn task(&self) -> Task {
        self.machines().task()
    }

    pub fn dim(&self) -> usize {
        self.machines().dim()
    }

    /// Predictions for every query row, as numbers for regression (shortest
    /// round-trip form) and label names for classification.
    pub fn predict_strings(&self, queries: &Matrix) -> Result<Vec<String>> {
        Ok(match self {
            ArchivedModel::Cobra(m) => m.predict_batch(queries)?.iter().map(f64::to_string).collect(),
            ArchivedModel::Ewa(m) => m.predict_batch(queries)?.iter().map(f64::to_string).collect(),
            ArchivedModel::ClassifierCobra(m) => m
                .predict_batch(queries)?
                .into_iter()
                .map(|l| m.label_names()[l].clone())
                .collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Debug)]
pub struct ModelArchive {
    pub model: ArchivedModel,
    pub split: SplitInfo,
    pub feature_names: Vec<String>,
    pub response_name: String,
}

#[derive(Serialize, Deserialize)]
struct ArchiveFile {
    format_version: u32,
    kind: ModelKind,
    split: SplitInfo,
    feature_names: Vec<String>,
    response_name: String,
    payload: serde_json::Value,
}

fn archive_err(e: impl std::fmt::Display) -> Error {
    Error::Archive(e.to_string())
}

/// Mirror of the private model fields, used to re-run validation on load.
#[derive(Deserialize)]
struct CobraFields {
    machines: MachineSet,
    predictions: Vec<Vec<f64>>,
    responses: Vec<f64>,
    epsilon: f64,
    alpha: usize,
    fallback: Fallback,
}

#[derive(Deserialize)]
struct EwaFields {
    machines: MachineSet,
    beta: f64,
    risks: Vec<f64>,
}

#[derive(Deserialize)]
struct ClassifierFields {
    machines: MachineSet,
    labels: Vec<Vec<usize>>,
    responses: Vec<usize>,
    alpha: usize,
    label_names: Vec<String>,
}

impl ModelArchive {
    pub fn to_json(&self) -> Result<String> {
        let payload = match &self.model {
            ArchivedModel::Cobra(m) => serde_json::to_value(m),
            ArchivedModel::Ewa(m) => serde_json::to_value(m),
            ArchivedModel::ClassifierCobra(m) => serde_json::to_value(m),
        }
        .map_err(|e| Error::Archive(format!("model cannot be archived: {e}")))?;
        let file = ArchiveFile {
            format_version: FORMAT_VERSION,
            kind: self.model.kind(),
            split: self.split,
            feature_names: self.feature_names.clone(),
            response_name: self.response_name.clone(),
            payload,
        };
        let mut s = serde_json::to_string_pretty(&file).map_err(archive_err)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ArchiveFile = serde_json::from_str(text).map_err(archive_err)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Archive(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        let model = match file.kind {
            ModelKind::Cobra => {
                let f: CobraFields = serde_json::from_value(file.payload).map_err(archive_err)?;
                ArchivedModel::Cobra(
                    CobraModel::from_predictions(f.machines, f.predictions, f.responses, f.epsilon, f.alpha)?
                        .with_fallback(f.fallback),
                )
            }
            ModelKind::Ewa => {
                let f: EwaFields = serde_json::from_value(file.payload).map_err(archive_err)?;
                ArchivedModel::Ewa(EwaModel::from_risks(f.machines, f.risks, f.beta)?)
            }
            ModelKind::ClassifierCobra => {
                let f: ClassifierFields = serde_json::from_value(file.payload).map_err(archive_err)?;
                ArchivedModel::ClassifierCobra(ClassifierCobraModel::from_labels(
                    f.machines,
                    f.labels,
                    f.responses,
                    f.label_names,
                    f.alpha,
                )?)
            }
        };
        if file.feature_names.len() != model.dim() {
            return Err(Error::Archive(format!(
                "{} feature names for a {}-dimensional model",
                file.feature_names.len(),
                model.dim()
            )));
        }
        Ok(Self {
            model,
            split: file.split,
            feature_names: file.feature_names,
            response_name: file.response_name,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
