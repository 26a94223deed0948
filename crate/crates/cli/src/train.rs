use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use cobra_ensemble::archive::{ArchivedModel, ModelArchive, SplitInfo};
use cobra_ensemble::classifier_cobra::ClassifierCobraModel;
use cobra_ensemble::cobra::CobraModel;
use cobra_ensemble::diagnostics::{machine_errors, tune_classifier_alpha, tune_epsilon, DiagnosticsReport};
use cobra_ensemble::ewa::{default_beta_grid, tune_beta, EwaModel};
use cobra_ensemble::machines::{load_prediction_tables, train_roster};
use cobra_ensemble::{load_csv, split, Dataset, MachineSet, SplitDataset, Task};

use crate::output::{usage, write_atomic, CliResult};
use crate::DataArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Aggregator {
    Cobra,
    Ewa,
    #[value(name = "classifier_cobra", alias = "classifier-cobra")]
    ClassifierCobra,
}

impl Aggregator {
    pub fn task(self) -> Task {
        match self {
            Aggregator::ClassifierCobra => Task::Classification,
            _ => Task::Regression,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "cobra")]
    pub aggregator: Aggregator,
    /// Consensus bandwidth (cobra).
    #[arg(long, conflicts_with = "tune", allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Machine quorum (cobra, classifier_cobra).
    #[arg(long, conflicts_with = "tune", allow_negative_numbers = true)]
    pub alpha: Option<usize>,
    /// Gibbs temperature (ewa).
    #[arg(long, conflicts_with = "tune", allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Choose the aggregation parameters on a seeded inner split of the
    /// aggregation part.
    #[arg(long)]
    pub tune: bool,
    /// Epsilon grid size used by `--tune` for cobra.
    #[arg(long, default_value_t = 20)]
    pub grid_size: usize,
    /// Extra machines given as precomputed predictions: one column per
    /// machine, one row per data row.
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Archive path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Reads the data, splits it and trains the roster (plus any external
/// prediction tables).
pub fn prepare(
    args: &DataArgs,
    task: Task,
    external: Option<&PathBuf>,
) -> CliResult<(Dataset, SplitDataset, MachineSet)> {
    let data = load_csv(&args.data, &args.column(), task)?;
    let parts = split(&data, args.ratio, args.seed)?;
    let trained = train_roster(&args.specs(task), &parts.training)?;
    let machines = match external {
        None => trained,
        Some(path) => {
            let mut all = trained.machines().to_vec();
            all.extend(load_prediction_tables(path, &data)?);
            MachineSet::new(all)?
        }
    };
    Ok((data, parts, machines))
}

pub fn feature_names(data: &Dataset) -> Vec<String> {
    data.column_names()
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| (0..data.dim()).map(|j| format!("x{j}")).collect())
}

pub fn run(args: TrainArgs) -> CliResult {
    let task = args.aggregator.task();
    let missing = |flag: &str| usage(format!("--{flag} is required unless --tune is given"));
    if !args.tune {
        match args.aggregator {
            Aggregator::Cobra if args.epsilon.is_none() => return Err(missing("epsilon")),
            Aggregator::Cobra | Aggregator::ClassifierCobra if args.alpha.is_none() => return Err(missing("alpha")),
            Aggregator::Ewa if args.beta.is_none() => return Err(missing("beta")),
            _ => {}
        }
    }
    let (data, parts, machines) = prepare(&args.data, task, args.external.as_ref())?;
    let seed = args.data.seed;

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "aggregator   {}",
        args.aggregator.to_possible_value().unwrap().get_name()
    );
    let _ = writeln!(summary, "machines     {}", machines.names().join(", "));
    let _ = writeln!(
        summary,
        "split        ratio={} seed={} training={} aggregation={}",
        parts.ratio,
        parts.seed,
        parts.training.len(),
        parts.aggregation.len()
    );

    let model = match args.aggregator {
        Aggregator::Cobra => {
            let (epsilon, alpha) = if args.tune {
                let alphas: Vec<usize> = (1..=machines.len()).collect();
                let t = tune_epsilon(&machines, &parts, &alphas, args.grid_size, seed)?;
                let _ = writeln!(summary, "tuning       validation_mse={:.6}", t.validation_mse);
                (t.epsilon, t.alpha)
            } else {
                (args.epsilon.unwrap(), args.alpha.unwrap())
            };
            let _ = writeln!(summary, "parameters   epsilon={epsilon} alpha={alpha}");
            ArchivedModel::Cobra(CobraModel::fit(machines.clone(), &parts, epsilon, alpha)?)
        }
        Aggregator::Ewa => {
            let beta = if args.tune {
                let t = tune_beta(&machines, &parts, &default_beta_grid(), seed)?;
                let _ = writeln!(summary, "tuning       validation_mse={:.6}", t.validation_mse);
                t.beta
            } else {
                args.beta.unwrap()
            };
            let model = EwaModel::fit(machines.clone(), &parts, beta)?;
            let weights: Vec<String> = model.weights().iter().map(|w| format!("{w:.6}")).collect();
            let _ = writeln!(summary, "parameters   beta={beta} weights=[{}]", weights.join(", "));
            ArchivedModel::Ewa(model)
        }
        Aggregator::ClassifierCobra => {
            let alpha = if args.tune {
                let t = tune_classifier_alpha(&machines, &parts, seed)?;
                let _ = writeln!(summary, "tuning       validation_error={:.6}", t.validation_error);
                t.alpha
            } else {
                args.alpha.unwrap()
            };
            let _ = writeln!(summary, "parameters   alpha={alpha}");
            ArchivedModel::ClassifierCobra(ClassifierCobraModel::fit(machines.clone(), &parts, alpha)?)
        }
    };

    let report = DiagnosticsReport {
        per_machine_errors: machine_errors(&machines, &parts.aggregation)?,
        tunings: Vec::new(),
    };
    let archive = ModelArchive {
        model,
        split: SplitInfo {
            ratio: parts.ratio,
            seed: parts.seed,
        },
        feature_names: feature_names(&data),
        response_name: args.data.response.clone(),
    };
    write_atomic(&args.out, archive.to_json()?.as_bytes())?;
    let _ = writeln!(summary, "\nheld-out errors on the aggregation part");
    summary.push_str(&report.to_table());
    let _ = writeln!(summary, "\nwrote {}", args.out.display());
    print!("{summary}");
    Ok(())
}
