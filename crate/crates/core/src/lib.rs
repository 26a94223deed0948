//! Ensemble aggregation of preliminary predictors ("machines").
//!
//! * [`cobra`]: COBRA consensus regression.
//! * [`ewa`]: exponentially weighted aggregation.
//! * [`classifier_cobra`]: COBRA-style majority vote for classification.
//! * [`diagnostics`]: per-machine errors and tuning of epsilon, alpha,
//!   machine subsets, split ratio and temperature.
//! * [`geometry`] and [`plots`]: Voronoi tessellations and deterministic SVG
//!   boxplots, QQ-plots and tessellation renderings.

pub mod archive;
pub mod classifier_cobra;
pub mod cobra;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod ewa;
pub mod geometry;
pub mod machines;
pub mod plots;
pub mod rng;

pub use data::{load_csv, split, ColumnRef, Dataset, Matrix, SplitDataset, Targets, Task};
pub use error::{Error, Result};
pub use machines::{Machine, MachineSet, MachineSpec, Output, Predictor};
