use std::path::PathBuf;

use clap::{Args, ValueEnum};
use cobra_ensemble::diagnostics::{
    beta_tuning_summary, machine_errors, tune_classifier_alpha, tune_epsilon, tune_machine_subset, tune_split,
    DiagnosticsReport, EpsilonTuning,
};
use cobra_ensemble::ewa::{default_beta_grid, tune_beta};
use cobra_ensemble::{load_csv, Task};

use crate::output::{usage, write_atomic, CliResult};
use crate::train::prepare;
use crate::{DataArgs, TaskArg};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tuner {
    /// Epsilon grid and alpha for cobra.
    Epsilon,
    /// Exhaustive machine subsets for cobra.
    Subset,
    /// Split ratio, retraining the roster for each candidate.
    Split,
    /// Gibbs temperature for ewa.
    Beta,
    /// Quorum for classifier-cobra.
    Alpha,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "regression")]
    pub task: TaskArg,
    /// Tuners to run, in order. Defaults to `epsilon` for regression and
    /// `alpha` for classification.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub tuners: Option<Vec<Tuner>>,
    #[arg(long, default_value_t = 20)]
    pub grid_size: usize,
    /// Candidate ratios for the split tuner.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7")]
    pub ratios: Vec<f64>,
    /// Fixed epsilon for the subset tuner (tuned when omitted).
    #[arg(long, requires = "alpha")]
    pub epsilon: Option<f64>,
    /// Fixed alpha for the subset tuner (tuned when omitted).
    #[arg(long, requires = "epsilon")]
    pub alpha: Option<usize>,
    /// Labelled CSV for the per-machine errors; the aggregation part is
    /// used when omitted.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn run(args: DiagnoseArgs) -> CliResult {
    let task = Task::from(args.task);
    let tuners = args.tuners.clone().unwrap_or_else(|| match task {
        Task::Regression => vec![Tuner::Epsilon],
        Task::Classification => vec![Tuner::Alpha],
    });
    if args.grid_size < 2 {
        return Err(usage("--grid-size must be at least 2"));
    }
    let (data, parts, machines) = prepare(&args.data, task, None)?;
    let seed = args.data.seed;

    let per_machine_errors = match &args.test {
        Some(path) => {
            let mut test = load_csv(path, &args.data.column(), task)?;
            if let Some(names) = data.label_names() {
                test = test.with_label_universe(names)?;
            }
            machine_errors(&machines, &test)?
        }
        None => machine_errors(&machines, &parts.aggregation)?,
    };

    let alphas: Vec<usize> = (1..=machines.len()).collect();
    let mut epsilon_result: Option<EpsilonTuning> = None;
    let mut tunings = Vec::new();
    for tuner in tuners {
        let tuning = match tuner {
            Tuner::Epsilon => {
                let t = tune_epsilon(&machines, &parts, &alphas, args.grid_size, seed)?;
                let summary = t.to_tuning();
                epsilon_result = Some(t);
                summary
            }
            Tuner::Subset => {
                let (eps, alpha) = match (args.epsilon, args.alpha) {
                    (Some(e), Some(a)) => (e, a),
                    _ => {
                        if epsilon_result.is_none() {
                            epsilon_result = Some(tune_epsilon(&machines, &parts, &alphas, args.grid_size, seed)?);
                        }
                        let t = epsilon_result.as_ref().unwrap();
                        (t.epsilon, t.alpha)
                    }
                };
                tune_machine_subset(&machines, &parts, eps, alpha, seed)?.to_tuning()
            }
            Tuner::Split => tune_split(&args.data.specs(task), &data, &args.ratios, seed, args.grid_size)?.to_tuning(),
            Tuner::Beta => beta_tuning_summary(&tune_beta(&machines, &parts, &default_beta_grid(), seed)?),
            Tuner::Alpha => tune_classifier_alpha(&machines, &parts, seed)?.to_tuning(),
        };
        tunings.push(tuning);
    }

    let report = DiagnosticsReport {
        per_machine_errors,
        tunings,
    };
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}
