//! Performance diagnostics and parameter tuning.
//!
//! Every tuner scores candidates on a seeded 50/50 inner split of the
//! aggregation part ([`holdout_halves`]): the first half plays the role of
//! `D_l` for the candidate aggregate, the second half measures its error.
//! Candidates are evaluated in a fixed grid order and the argmin keeps the
//! first of equal scores unless a tuner documents a different tie rule.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier_cobra::{label_counts, retained_labels, ClassifierCobraModel};
use crate::cobra::{check_params, global_mean, mean_over, retained, CobraModel};
use crate::data::{holdout_halves, split, Dataset, SplitDataset, Task};
use crate::error::{Error, Result};
use crate::ewa::BetaTuning;
use crate::machines::{plurality, train_roster, MachineSet, MachineSpec};

/// Largest roster accepted by the exhaustive subset search.
pub const MAX_SUBSET_MACHINES: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineErrors {
    pub name: String,
    /// `prediction - actual` per test row.
    pub residuals: Vec<f64>,
    pub mse: f64,
    pub mae: f64,
    /// Fraction of wrong labels; classification only.
    pub misclassification: Option<f64>,
}

impl MachineErrors {
    pub fn from_predictions(name: impl Into<String>, predicted: &[f64], actual: &[f64], task: Task) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::InvalidData(format!(
                "{} predictions for {} responses",
                predicted.len(),
                actual.len()
            )));
        }
        if actual.is_empty() {
            return Err(Error::InvalidData("no rows to score".into()));
        }
        let n = actual.len() as f64;
        let residuals: Vec<f64> = predicted.iter().zip(actual).map(|(p, a)| p - a).collect();
        let mse = residuals.iter().map(|r| r * r).sum::<f64>() / n;
        let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n;
        let misclassification =
            (task == Task::Classification).then(|| residuals.iter().filter(|&&r| r != 0.0).count() as f64 / n);
        Ok(Self {
            name: name.into(),
            residuals,
            mse,
            mae,
            misclassification,
        })
    }
}

fn actual_values(test: &Dataset) -> Vec<f64> {
    match test.task() {
        Task::Regression => test.responses().map(<[f64]>::to_vec).unwrap_or_default(),
        Task::Classification => test
            .labels()
            .map(|l| l.iter().map(|&v| v as f64).collect())
            .unwrap_or_default(),
    }
}

/// Residuals, MSE and MAE of every machine on `test` (plus the
/// misclassification rate for classifiers). Label residuals are differences
/// of label indices.
pub fn machine_errors(machines: &MachineSet, test: &Dataset) -> Result<Vec<MachineErrors>> {
    if machines.task() != test.task() {
        return Err(Error::KindMismatch {
            machine: machines.names()[0].to_string(),
            expected: test.task(),
            found: machines.task(),
        });
    }
    let actual = actual_values(test);
    machines
        .iter()
        .map(|m| {
            let predicted = (0..test.len())
                .map(|i| m.predict(test.row(i)).map(|o| o.as_f64()).map_err(|e| e.at_row(i)))
                .collect::<Result<Vec<_>>>()?;
            MachineErrors::from_predictions(m.name(), &predicted, &actual, test.task())
        })
        .collect()
}

/// Parameter values of one tuning candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tuner", rename_all = "snake_case")]
pub enum Assignment {
    Epsilon { epsilon: f64, alpha: usize },
    Subset { machines: Vec<String>, alpha: usize },
    Split { ratio: f64 },
    Beta { beta: f64 },
    Alpha { alpha: usize },
}

impl Assignment {
    fn describe(&self) -> String {
        match self {
            Assignment::Epsilon { epsilon, alpha } => format!("epsilon={epsilon:.6} alpha={alpha}"),
            Assignment::Subset { machines, alpha } => format!("machines={} alpha={alpha}", machines.join("+")),
            Assignment::Split { ratio } => format!("ratio={ratio}"),
            Assignment::Beta { beta } => format!("beta={beta:.6e}"),
            Assignment::Alpha { alpha } => format!("alpha={alpha}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub assignment: Assignment,
    pub validation_error: f64,
}

/// Outcome of one tuner: every evaluated candidate in grid order and the
/// winner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub tuner: String,
    pub grid: Vec<GridPoint>,
    pub best: GridPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub per_machine_errors: Vec<MachineErrors>,
    pub tunings: Vec<Tuning>,
}

impl DiagnosticsReport {
    /// Fixed-format text table of machine errors and tuner winners.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if !self.per_machine_errors.is_empty() {
            let _ = writeln!(out, "{:<20} {:>14} {:>14} {:>10}", "machine", "mse", "mae", "misclass");
            for e in &self.per_machine_errors {
                let mis = e
                    .misclassification
                    .map_or_else(|| "-".to_string(), |m| format!("{m:.4}"));
                let _ = writeln!(out, "{:<20} {:>14.6} {:>14.6} {:>10}", e.name, e.mse, e.mae, mis);
            }
        }
        for t in &self.tunings {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "tuner {} ({} candidates)", t.tuner, t.grid.len());
            let _ = writeln!(
                out,
                "  best: {}  validation_error={:.6}",
                t.best.assignment.describe(),
                t.best.validation_error
            );
            if let Some(note) = &t.note {
                let _ = writeln!(out, "  note: {note}");
            }
        }
        out
    }
}

/// Prediction cache of a roster over the aggregation part, cut into the
/// inner fit/validation halves.
struct InnerSplit {
    /// `fit_cache[j][a]`: machine `j` on the `a`-th fit row.
    fit_cache: Vec<Vec<f64>>,
    fit_y: Vec<f64>,
    /// `val_outputs[b][j]`: machine `j` on the `b`-th validation row.
    val_outputs: Vec<Vec<f64>>,
    val_y: Vec<f64>,
    /// `max - min` over every cached prediction on the aggregation part.
    spread: f64,
}

impl InnerSplit {
    fn new(machines: &MachineSet, split: &SplitDataset, seed: u64) -> Result<Self> {
        machines.require(Task::Regression)?;
        let y = split.aggregation.responses()?;
        let table = machines.real_table(&split.aggregation)?;
        let (fit, val) = holdout_halves(y.len(), seed)?;
        let lo = table.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = table.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            fit_cache: table.iter().map(|row| fit.iter().map(|&i| row[i]).collect()).collect(),
            fit_y: fit.iter().map(|&i| y[i]).collect(),
            val_outputs: val.iter().map(|&i| table.iter().map(|row| row[i]).collect()).collect(),
            val_y: val.iter().map(|&i| y[i]).collect(),
            spread: hi - lo,
        })
    }

    /// Validation MSE of COBRA over the machines in `subset` (global-mean
    /// fallback on empty consensus).
    fn cobra_mse(&self, subset: &[usize], epsilon: f64, alpha: usize) -> f64 {
        let cache: Vec<Vec<f64>> = subset.iter().map(|&j| self.fit_cache[j].clone()).collect();
        let fallback = global_mean(&self.fit_y);
        let mut sum = 0.0;
        for (outputs, y) in self.val_outputs.iter().zip(&self.val_y) {
            let outs: Vec<f64> = subset.iter().map(|&j| outputs[j]).collect();
            let kept = retained(&cache, &outs, epsilon, alpha);
            let p = mean_over(&self.fit_y, &kept).unwrap_or(fallback);
            sum += (p - y).powi(2);
        }
        sum / self.val_y.len() as f64
    }
}

/// Epsilon values `spread * k / grid_size` for `k = 1..=grid_size`.
pub fn epsilon_grid(spread: f64, grid_size: usize) -> Vec<f64> {
    (1..=grid_size).map(|k| spread * k as f64 / grid_size as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonTuning {
    pub epsilon: f64,
    pub alpha: usize,
    pub validation_mse: f64,
    /// Spread used to anchor the grid (1.0 when degenerate).
    pub spread: f64,
    /// All machine predictions on the aggregation part were identical.
    pub degenerate: bool,
    pub grid: Vec<GridPoint>,
}

impl EpsilonTuning {
    pub fn to_tuning(&self) -> Tuning {
        Tuning {
            tuner: "epsilon".into(),
            grid: self.grid.clone(),
            best: GridPoint {
                assignment: Assignment::Epsilon {
                    epsilon: self.epsilon,
                    alpha: self.alpha,
                },
                validation_error: self.validation_mse,
            },
            note: self
                .degenerate
                .then(|| "degenerate spread: machine predictions identical, spread taken as 1.0".into()),
        }
    }
}

/// Grid search over `(epsilon, alpha)` for COBRA.
///
/// The epsilon grid is [`epsilon_grid`] anchored at the spread of all cached
/// machine predictions on the aggregation part. Ties go to the smaller
/// epsilon, then the smaller alpha. When the spread is zero the spread is
/// taken as 1.0 and the smallest grid value is returned.
pub fn tune_epsilon(
    machines: &MachineSet,
    split: &SplitDataset,
    alphas: &[usize],
    grid_size: usize,
    seed: u64,
) -> Result<EpsilonTuning> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid_size must be at least 2, got {grid_size}"
        )));
    }
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("no alpha candidates".into()));
    }
    for &a in alphas {
        check_params(1.0, a, machines.len())?;
    }
    let inner = InnerSplit::new(machines, split, seed)?;
    let degenerate = inner.spread.is_nan() || inner.spread <= 0.0;
    let spread = if degenerate { 1.0 } else { inner.spread };
    let all: Vec<usize> = (0..machines.len()).collect();

    let mut grid = Vec::new();
    let mut best: Option<(f64, usize, f64)> = None;
    for (k, eps) in epsilon_grid(spread, grid_size).into_iter().enumerate() {
        for &alpha in alphas {
            let err = inner.cobra_mse(&all, eps, alpha);
            grid.push(GridPoint {
                assignment: Assignment::Epsilon { epsilon: eps, alpha },
                validation_error: err,
            });
            if degenerate && k > 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((be, ba, berr)) => err < berr || (err == berr && (eps < be || (eps == be && alpha < ba))),
            };
            if better {
                best = Some((eps, alpha, err));
            }
        }
    }
    let (epsilon, alpha, validation_mse) = best.expect("grid is non-empty");
    Ok(EpsilonTuning {
        epsilon,
        alpha,
        validation_mse,
        spread,
        degenerate,
        grid,
    })
}

/// Non-empty subsets of `0..m`, ordered by size then lexicographically.
pub fn subsets_in_order(m: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << m))
        .map(|mask| (0..m).filter(|&j| mask & (1 << j) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetTuning {
    /// Roster indices of the winning subset, ascending.
    pub subset: Vec<usize>,
    pub names: Vec<String>,
    pub alpha: usize,
    pub validation_mse: f64,
    pub grid: Vec<GridPoint>,
}

impl SubsetTuning {
    pub fn to_tuning(&self) -> Tuning {
        Tuning {
            tuner: "subset".into(),
            grid: self.grid.clone(),
            best: GridPoint {
                assignment: Assignment::Subset {
                    machines: self.names.clone(),
                    alpha: self.alpha,
                },
                validation_error: self.validation_mse,
            },
            note: None,
        }
    }
}

/// Exhaustive search over non-empty machine subsets at fixed epsilon, with
/// alpha clamped to the subset size. Ties go to the smaller subset, then to
/// the lexicographically first in roster order.
pub fn tune_machine_subset(
    machines: &MachineSet,
    split: &SplitDataset,
    epsilon: f64,
    alpha: usize,
    seed: u64,
) -> Result<SubsetTuning> {
    let m = machines.len();
    if m > MAX_SUBSET_MACHINES {
        return Err(Error::InvalidParameter(format!(
            "exhaustive subset search supports at most {MAX_SUBSET_MACHINES} machines, got {m}"
        )));
    }
    check_params(epsilon, alpha, m)?;
    let inner = InnerSplit::new(machines, split, seed)?;
    let names = machines.names();
    let mut grid = Vec::new();
    let mut best: Option<(Vec<usize>, usize, f64)> = None;
    for subset in subsets_in_order(m) {
        let a = alpha.min(subset.len());
        let err = inner.cobra_mse(&subset, epsilon, a);
        grid.push(GridPoint {
            assignment: Assignment::Subset {
                machines: subset.iter().map(|&j| names[j].to_string()).collect(),
                alpha: a,
            },
            validation_error: err,
        });
        if best.as_ref().is_none_or(|b| err < b.2) {
            best = Some((subset, a, err));
        }
    }
    let (subset, alpha, validation_mse) = best.expect("m >= 1");
    Ok(SubsetTuning {
        names: subset.iter().map(|&j| names[j].to_string()).collect(),
        subset,
        alpha,
        validation_mse,
        grid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitTuning {
    pub ratio: f64,
    pub validation_mse: f64,
    pub grid: Vec<GridPoint>,
}

impl SplitTuning {
    pub fn to_tuning(&self) -> Tuning {
        Tuning {
            tuner: "split".into(),
            grid: self.grid.clone(),
            best: GridPoint {
                assignment: Assignment::Split { ratio: self.ratio },
                validation_error: self.validation_mse,
            },
            note: None,
        }
    }
}

/// For each ratio: split `data` with `seed`, retrain the roster on the
/// training part and tune `(epsilon, alpha)` over all alphas with
/// `grid_size` epsilons. The ratio whose tuned COBRA has the lowest
/// validation MSE wins; ties go to the ratio nearer 0.5, then the smaller.
pub fn tune_split(
    specs: &[MachineSpec],
    data: &Dataset,
    ratios: &[f64],
    seed: u64,
    grid_size: usize,
) -> Result<SplitTuning> {
    if ratios.is_empty() {
        return Err(Error::InvalidParameter("no split ratios".into()));
    }
    let mut grid = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for &ratio in ratios {
        let s = split(data, ratio, seed)?;
        let machines = train_roster(specs, &s.training)?;
        let alphas: Vec<usize> = (1..=machines.len()).collect();
        let err = tune_epsilon(&machines, &s, &alphas, grid_size, seed)?.validation_mse;
        grid.push(GridPoint {
            assignment: Assignment::Split { ratio },
            validation_error: err,
        });
        let better = match best {
            None => true,
            Some((br, be)) => {
                let (d, bd) = ((ratio - 0.5).abs(), (br - 0.5).abs());
                err < be || (err == be && (d < bd || (d == bd && ratio < br)))
            }
        };
        if better {
            best = Some((ratio, err));
        }
    }
    let (ratio, validation_mse) = best.expect("ratios non-empty");
    Ok(SplitTuning {
        ratio,
        validation_mse,
        grid,
    })
}

pub fn beta_tuning_summary(t: &BetaTuning) -> Tuning {
    Tuning {
        tuner: "beta".into(),
        grid: t
            .grid
            .iter()
            .map(|&(beta, err)| GridPoint {
                assignment: Assignment::Beta { beta },
                validation_error: err,
            })
            .collect(),
        best: GridPoint {
            assignment: Assignment::Beta { beta: t.beta },
            validation_error: t.validation_mse,
        },
        note: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaTuning {
    pub alpha: usize,
    pub validation_error: f64,
    pub grid: Vec<GridPoint>,
}

impl AlphaTuning {
    pub fn to_tuning(&self) -> Tuning {
        Tuning {
            tuner: "alpha".into(),
            grid: self.grid.clone(),
            best: GridPoint {
                assignment: Assignment::Alpha { alpha: self.alpha },
                validation_error: self.validation_error,
            },
            note: None,
        }
    }
}

/// Quorum selection for the majority-vote classifier: misclassification rate
/// on the inner validation half for each `alpha` in `1..=M`, ties to the
/// smaller alpha.
pub fn tune_classifier_alpha(machines: &MachineSet, split: &SplitDataset, seed: u64) -> Result<AlphaTuning> {
    machines.require(Task::Classification)?;
    let y = split.aggregation.labels()?;
    let k = split.aggregation.n_labels();
    let table = machines.label_table(&split.aggregation)?;
    let (fit, val) = holdout_halves(y.len(), seed)?;
    let cache: Vec<Vec<usize>> = table.iter().map(|row| fit.iter().map(|&i| row[i]).collect()).collect();
    let fit_y: Vec<usize> = fit.iter().map(|&i| y[i]).collect();
    let mut grid = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for alpha in 1..=machines.len() {
        let mut wrong = 0usize;
        for &i in &val {
            let outputs: Vec<usize> = table.iter().map(|row| row[i]).collect();
            let kept = retained_labels(&cache, &outputs, alpha);
            let counts = if kept.is_empty() {
                label_counts(&fit_y, 0..fit_y.len(), k)
            } else {
                label_counts(&fit_y, kept, k)
            };
            if plurality(&counts) != y[i] {
                wrong += 1;
            }
        }
        let err = wrong as f64 / val.len() as f64;
        grid.push(GridPoint {
            assignment: Assignment::Alpha { alpha },
            validation_error: err,
        });
        if best.is_none_or(|(_, e)| err < e) {
            best = Some((alpha, err));
        }
    }
    let (alpha, validation_error) = best.expect("M >= 1");
    Ok(AlphaTuning {
        alpha,
        validation_error,
        grid,
    })
}

/// Number of machines agreeing with the query at each aggregation point
/// (COBRA: within epsilon).
pub fn cobra_agreement(model: &CobraModel, x: &[f64]) -> Result<Vec<usize>> {
    let outputs = model.machines().predict_real(x)?;
    let l = model.responses().len();
    Ok((0..l)
        .map(|i| {
            model
                .predictions()
                .iter()
                .zip(&outputs)
                .filter(|(row, r)| (row[i] - *r).abs() <= model.epsilon())
                .count()
        })
        .collect())
}

/// Number of machines giving each aggregation point the query's label.
pub fn classifier_agreement(model: &ClassifierCobraModel, x: &[f64]) -> Result<Vec<usize>> {
    let outputs = model.machines().predict_labels(x)?;
    let l = model.responses().len();
    Ok((0..l)
        .map(|i| {
            model
                .labels()
                .iter()
                .zip(&outputs)
                .filter(|(row, o)| row[i] == **o)
                .count()
        })
        .collect())
}

/// Five-number summary with Tukey whiskers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
    /// Values beyond 1.5 IQR from the quartiles, ascending.
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule):
/// `h = (n - 1) p`, interpolating between `x[floor h]` and `x[floor h + 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Quartiles by [`quantile_sorted`]; whiskers reach the most extreme data
/// within `[q1 - 1.5 IQR, q3 + 1.5 IQR]`; everything outside is an outlier.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::InvalidData("boxplot of an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("boxplot sample holds non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (q1, median, q3) = (
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.75),
    );
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|v| (lo_fence..=hi_fence).contains(v))
        .collect();
    Ok(BoxplotStats {
        lower_whisker: inside.first().copied().unwrap_or(q1).min(q1),
        q1,
        median,
        q3,
        upper_whisker: inside.last().copied().unwrap_or(q3).max(q3),
        outliers: sorted
            .into_iter()
            .filter(|v| !(lo_fence..=hi_fence).contains(v))
            .collect(),
    })
}

/// Paired order statistics `(sorted predicted[k], sorted actual[k])`.
pub fn qq_points(predicted: &[f64], actual: &[f64]) -> Result<Vec<(f64, f64)>> {
    if predicted.len() != actual.len() {
        return Err(Error::InvalidData(format!(
            "QQ-plot needs equal-length samples, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    let mut p = predicted.to_vec();
    let mut a = actual.to_vec();
    p.sort_by(f64::total_cmp);
    a.sort_by(f64::total_cmp);
    Ok(p.into_iter().zip(a).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::machines::{Machine, Model, Output, PredictionTable};
    use crate::rng::XorShift64Star;
    use proptest::prelude::*;

    fn synthetic(seed: u64, n: usize) -> Dataset {
        let mut rng = XorShift64Star::new(seed);
        let x: Vec<f64> = (0..n * 2).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let y = (0..n)
            .map(|i| (2.0 * x[2 * i]).sin() * 2.0 + x[2 * i + 1] + 0.2 * rng.normal())
            .collect();
        Dataset::regression(Matrix::new(n, 2, x).unwrap(), y).unwrap()
    }

    fn constant_machine(data: &Dataset, name: &str, value: f64) -> Machine {
        let outs = vec![Output::Real(value); data.len()];
        Machine::new(name, Model::Table(PredictionTable::new(data.features(), outs).unwrap()))
    }

    fn roster(s: &SplitDataset) -> MachineSet {
        train_roster(
            &[
                MachineSpec::ridge(),
                MachineSpec::Tree {
                    max_depth: 3,
                    min_leaf: 2,
                },
                MachineSpec::Knn { k: 3 },
            ],
            &s.training,
        )
        .unwrap()
    }

    #[test]
    fn perfect_and_constant_machines() {
        let d = Dataset::regression(Matrix::new(2, 1, vec![0.0, 1.0]).unwrap(), vec![1.0, -1.0]).unwrap();
        let perfect = Machine::new(
            "perfect",
            Model::Table(PredictionTable::new(d.features(), vec![Output::Real(1.0), Output::Real(-1.0)]).unwrap()),
        );
        let zero = constant_machine(&d, "zero", 0.0);
        let errs = machine_errors(&MachineSet::new(vec![perfect, zero]).unwrap(), &d).unwrap();
        assert_eq!(errs[0].residuals, vec![0.0, 0.0]);
        assert_eq!(errs[0].mse, 0.0);
        assert_eq!((errs[1].mse, errs[1].mae), (1.0, 1.0));
        assert_eq!(errs[1].misclassification, None);
    }

    #[test]
    fn machine_errors_match_loop() {
        let d = synthetic(1, 80);
        let s = split(&d, 0.5, 2).unwrap();
        let ms = roster(&s);
        let test = synthetic(9, 50);
        let errs = machine_errors(&ms, &test).unwrap();
        let y = test.responses().unwrap();
        for (m, e) in ms.iter().zip(&errs) {
            let mut sq = 0.0;
            for (row, t) in test.features().iter_rows().zip(y) {
                sq += (m.predict_real(row).unwrap() - t).powi(2);
            }
            assert!((e.mse - sq / 50.0).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_error_rate() {
        let d = Dataset::classification(
            Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
            vec![0, 1, 1, 0],
            2,
        )
        .unwrap();
        let t = PredictionTable::new(d.features(), vec![Output::Label(0); 4]).unwrap();
        let ms = MachineSet::new(vec![Machine::new("zero", Model::Table(t))]).unwrap();
        let e = machine_errors(&ms, &d).unwrap();
        assert_eq!(e[0].misclassification, Some(0.5));
        let reg = synthetic(1, 4);
        assert!(matches!(machine_errors(&ms, &reg), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn degenerate_spread_rule() {
        let d = synthetic(3, 40);
        let s = split(&d, 0.5, 1).unwrap();
        let ms = MachineSet::new(vec![constant_machine(&d, "c", 4.0)]).unwrap();
        let t = tune_epsilon(&ms, &s, &[1], 10, 5).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.spread, 1.0);
        assert_eq!(t.epsilon, 0.1);
        assert_eq!(t.grid.len(), 10);
    }

    #[test]
    fn tiny_grid_is_exhaustive() {
        let d = synthetic(4, 60);
        let s = split(&d, 0.5, 1).unwrap();
        let ms = roster(&s);
        let t = tune_epsilon(&ms, &s, &[1], 2, 3).unwrap();
        assert_eq!(t.grid.len(), 2);
        let min = t.grid.iter().map(|g| g.validation_error).fold(f64::INFINITY, f64::min);
        assert_eq!(t.validation_mse, min);
        let first = t.grid.iter().find(|g| g.validation_error == min).unwrap();
        assert_eq!(
            first.assignment,
            Assignment::Epsilon {
                epsilon: t.epsilon,
                alpha: t.alpha
            }
        );
    }

    #[test]
    fn tune_epsilon_parameter_errors() {
        let d = synthetic(4, 30);
        let s = split(&d, 0.5, 1).unwrap();
        let ms = roster(&s);
        assert!(tune_epsilon(&ms, &s, &[1], 1, 0).is_err());
        assert!(tune_epsilon(&ms, &s, &[], 5, 0).is_err());
        assert!(tune_epsilon(&ms, &s, &[4], 5, 0).is_err());
    }

    #[test]
    fn tune_epsilon_matches_refit_oracle() {
        let d = synthetic(5, 120);
        let s = split(&d, 0.5, 8).unwrap();
        let ms = roster(&s);
        let alphas = [1, 2, 3];
        let t = tune_epsilon(&ms, &s, &alphas, 20, 6).unwrap();

        // Re-fit a CobraModel per candidate through the public API.
        let (fit, val) = holdout_halves(s.aggregation.len(), 6).unwrap();
        let fit_split = SplitDataset {
            aggregation: s.aggregation.subset(&fit),
            ..s.clone()
        };
        let table = ms.real_table(&s.aggregation).unwrap();
        let spread = table.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
            - table.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let y = s.aggregation.responses().unwrap();
        let mut best = (0.0, 0, f64::INFINITY);
        for k in 1..=20 {
            let eps = spread * k as f64 / 20.0;
            for &a in &alphas {
                let model = CobraModel::fit(ms.clone(), &fit_split, eps, a).unwrap();
                let err = val
                    .iter()
                    .map(|&i| (model.predict(s.aggregation.row(i)).unwrap() - y[i]).powi(2))
                    .sum::<f64>()
                    / val.len() as f64;
                if err < best.2 {
                    best = (eps, a, err);
                }
            }
        }
        assert_eq!((t.epsilon, t.alpha), (best.0, best.1));
        assert!((t.validation_mse - best.2).abs() < 1e-12);
        assert!(t.grid.iter().all(|g| t.validation_mse <= g.validation_error));
    }

    #[test]
    fn tuners_are_reproducible() {
        let d = synthetic(6, 80);
        let s = split(&d, 0.5, 1).unwrap();
        let ms = roster(&s);
        assert_eq!(
            tune_epsilon(&ms, &s, &[1, 2], 8, 3).unwrap(),
            tune_epsilon(&ms, &s, &[1, 2], 8, 3).unwrap()
        );
        assert_eq!(
            tune_machine_subset(&ms, &s, 0.5, 2, 3).unwrap(),
            tune_machine_subset(&ms, &s, 0.5, 2, 3).unwrap()
        );
    }

    #[test]
    fn subset_search() {
        let d = synthetic(7, 80);
        let s = split(&d, 0.5, 1).unwrap();
        let one = MachineSet::new(vec![constant_machine(&d, "c", 0.0)]).unwrap();
        let t = tune_machine_subset(&one, &s, 0.5, 1, 0).unwrap();
        assert_eq!(t.subset, vec![0]);

        let dup = MachineSet::new(vec![constant_machine(&d, "a", 1.0), constant_machine(&d, "b", 1.0)]).unwrap();
        let t = tune_machine_subset(&dup, &s, 0.5, 2, 0).unwrap();
        assert_eq!(t.names, vec!["a"]);
        assert_eq!(t.alpha, 1);

        let ms = roster(&s);
        let t = tune_machine_subset(&ms, &s, 0.5, 2, 4).unwrap();
        assert_eq!(t.grid.len(), 7);
        // Independent enumeration by bitmask through the public model API.
        let (fit, val) = holdout_halves(s.aggregation.len(), 4).unwrap();
        let fit_split = SplitDataset {
            aggregation: s.aggregation.subset(&fit),
            ..s.clone()
        };
        let y = s.aggregation.responses().unwrap();
        let mut scores = vec![];
        for mask in 1u32..8 {
            let idx: Vec<usize> = (0..3).filter(|j| mask & (1 << j) != 0).collect();
            let sub = ms.select(&idx).unwrap();
            let model = CobraModel::fit(sub, &fit_split, 0.5, 2.min(idx.len())).unwrap();
            let err = val
                .iter()
                .map(|&i| (model.predict(s.aggregation.row(i)).unwrap() - y[i]).powi(2))
                .sum::<f64>()
                / val.len() as f64;
            scores.push((err, idx.len(), idx));
        }
        scores.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        assert_eq!(t.subset, scores[0].2);
        assert!((t.validation_mse - scores[0].0).abs() < 1e-12);
    }

    #[test]
    fn subset_bound() {
        let d = synthetic(7, 40);
        let s = split(&d, 0.5, 1).unwrap();
        let many = MachineSet::new(
            (0..13)
                .map(|j| constant_machine(&d, &format!("c{j}"), j as f64))
                .collect(),
        )
        .unwrap();
        assert!(tune_machine_subset(&many, &s, 0.5, 1, 0).is_err());
        assert_eq!(
            subsets_in_order(3),
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2]
            ]
        );
    }

    #[test]
    fn split_tuning() {
        let d = synthetic(8, 120);
        let specs = [MachineSpec::ridge(), MachineSpec::Knn { k: 3 }];
        assert_eq!(tune_split(&specs, &d, &[0.3], 1, 5).unwrap().ratio, 0.3);
        assert_eq!(tune_split(&specs, &d, &[0.5, 0.5], 1, 5).unwrap().ratio, 0.5);
        let t = tune_split(&specs, &d, &[0.3, 0.5, 0.7], 1, 5).unwrap();
        let mut oracle = vec![];
        for r in [0.3, 0.5, 0.7] {
            let s = split(&d, r, 1).unwrap();
            let ms = train_roster(&specs, &s.training).unwrap();
            oracle.push((tune_epsilon(&ms, &s, &[1, 2], 5, 1).unwrap().validation_mse, r));
        }
        let best = oracle
            .iter()
            .copied()
            .min_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then(((a.1 - 0.5f64).abs()).total_cmp(&(b.1 - 0.5f64).abs()))
            })
            .unwrap();
        assert_eq!(t.ratio, best.1);
        assert_eq!(t.validation_mse, best.0);
    }

    #[test]
    fn classifier_alpha_tuning() {
        let mut rng = XorShift64Star::new(3);
        let n = 80;
        let x: Vec<f64> = (0..n * 2).map(|_| rng.uniform(0.0, 1.0)).collect();
        let labels = (0..n).map(|i| usize::from(x[2 * i] + x[2 * i + 1] > 1.0)).collect();
        let d = Dataset::classification(Matrix::new(n, 2, x).unwrap(), labels, 2).unwrap();
        let s = split(&d, 0.5, 1).unwrap();
        let ms = train_roster(
            &[
                MachineSpec::Knn { k: 3 },
                MachineSpec::tree(),
                MachineSpec::NearestCentroid,
            ],
            &s.training,
        )
        .unwrap();
        let t = tune_classifier_alpha(&ms, &s, 2).unwrap();
        assert_eq!(t.grid.len(), 3);
        assert!(t.grid.iter().all(|g| t.validation_error <= g.validation_error));
    }

    #[test]
    fn agreement_counts() {
        let d = synthetic(9, 40);
        let s = split(&d, 0.5, 1).unwrap();
        let ms = roster(&s);
        let model = CobraModel::fit(ms, &s, 0.4, 2).unwrap();
        let q = s.aggregation.row(0);
        let counts = cobra_agreement(&model, q).unwrap();
        let kept = model.retained_indices(q).unwrap();
        let from_counts: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] >= 2).collect();
        assert_eq!(kept, from_counts);
        assert_eq!(counts[0], 3);
    }

    #[test]
    fn boxplot_examples() {
        let b = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!((b.lower_whisker, b.upper_whisker), (1.0, 5.0));
        assert!(b.outliers.is_empty());

        let c = boxplot_stats(&[2.5; 7]).unwrap();
        assert_eq!([c.lower_whisker, c.q1, c.median, c.q3, c.upper_whisker], [2.5; 5]);
        assert!(c.outliers.is_empty());

        let o = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(o.outliers, vec![100.0]);
        assert_eq!(o.upper_whisker, 4.0);
        assert!(boxplot_stats(&[]).is_err());
    }

    #[test]
    fn boxplot_matches_sort_oracle() {
        let mut rng = XorShift64Star::new(12);
        let v: Vec<f64> = (0..100).map(|_| rng.normal().powi(3)).collect();
        let b = boxplot_stats(&v).unwrap();
        let mut s = v.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // n = 100: q1 at h = 24.75, median at 49.5, q3 at 74.25.
        let q = |h: f64| {
            let i = h as usize;
            s[i] + (h - i as f64) * (s[i + 1] - s[i])
        };
        assert!((b.q1 - q(24.75)).abs() < 1e-12);
        assert!((b.median - q(49.5)).abs() < 1e-12);
        assert!((b.q3 - q(74.25)).abs() < 1e-12);
        let iqr = b.q3 - b.q1;
        let n_out = s
            .iter()
            .filter(|&&x| x < b.q1 - 1.5 * iqr || x > b.q3 + 1.5 * iqr)
            .count();
        assert_eq!(b.outliers.len(), n_out);
    }

    #[test]
    fn qq_examples() {
        let a = vec![3.0, 1.0, 2.0];
        assert!(qq_points(&a, &a).unwrap().iter().all(|(p, q)| p == q));
        let shifted: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        assert_eq!(
            qq_points(&shifted, &a).unwrap(),
            vec![(2.0, 1.0), (3.0, 2.0), (4.0, 3.0)]
        );
        assert!(qq_points(&a, &a[..2]).is_err());
    }

    #[test]
    fn report_table_format() {
        let r = DiagnosticsReport {
            per_machine_errors: vec![MachineErrors::from_predictions("m", &[1.0], &[0.0], Task::Regression).unwrap()],
            tunings: vec![],
        };
        assert_eq!(
            r.to_table(),
            format!(
                "{:<20} {:>14} {:>14} {:>10}\n{:<20} {:>14} {:>14} {:>10}\n",
                "machine", "mse", "mae", "misclass", "m", "1.000000", "1.000000", "-"
            )
        );
    }

    proptest! {
        #[test]
        fn boxplot_ordering(v in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
            let b = boxplot_stats(&v).unwrap();
            prop_assert!(b.lower_whisker <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.upper_whisker);
            for o in &b.outliers {
                prop_assert!(*o < b.lower_whisker || *o > b.upper_whisker);
            }
        }

        #[test]
        fn qq_monotone(p in proptest::collection::vec(-1e3f64..1e3, 0..40), seed in any::<u64>()) {
            let mut rng = XorShift64Star::new(seed);
            let a: Vec<f64> = p.iter().map(|_| rng.normal()).collect();
            let pts = qq_points(&p, &a).unwrap();
            for w in pts.windows(2) {
                prop_assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
            }
        }
    }
}
