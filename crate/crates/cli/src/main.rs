//! `cobra`: train, apply, diagnose and plot ensemble aggregates.
//!
//! Exit codes: 0 on success, 1 when data or a model is rejected, 2 on
//! command-line misuse.

mod diagnose;
mod output;
mod plot;
mod predict;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cobra_ensemble::rng::derive_seed;
use cobra_ensemble::{ColumnRef, MachineSpec, Task};

use crate::output::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "cobra",
    version,
    about = "Ensemble aggregation of regression and classification machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train machines and an aggregate, and write a JSON model archive.
    Train(train::TrainArgs),
    /// Predict every row of a features-only CSV with an archived model.
    Predict(predict::PredictArgs),
    /// Report per-machine errors and run parameter tuners.
    Diagnose(diagnose::DiagnoseArgs),
    /// Render boxplot, QQ-plot or Voronoi SVGs.
    Plot(plot::PlotArgs),
}

/// Data, roster and split options shared by `train` and `diagnose`.
#[derive(Args, Debug)]
pub struct DataArgs {
    /// Training CSV (comma separated, optional header row).
    #[arg(long)]
    pub data: PathBuf,
    /// Response column, by header name or zero-based index.
    #[arg(long)]
    pub response: String,
    /// Comma-separated machine roster, e.g. `ridge:lambda=0.5,knn:k=3,tree:max_depth=4`.
    /// Defaults to the built-in roster for the task. Bagging seeds are derived
    /// from `--seed`.
    #[arg(long, value_delimiter = ',')]
    pub machines: Option<Vec<MachineSpec>>,
    /// Fraction of rows used to train the machines; the rest is the
    /// aggregation part.
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    /// Seed for the split, bagging and tuning.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DataArgs {
    pub fn column(&self) -> ColumnRef {
        ColumnRef::from(self.response.as_str())
    }

    /// The roster with bagging seeds drawn from `--seed`.
    pub fn specs(&self, task: Task) -> Vec<MachineSpec> {
        let specs = self
            .machines
            .clone()
            .unwrap_or_else(|| MachineSpec::default_roster(task, 0));
        specs
            .into_iter()
            .enumerate()
            .map(|(j, s)| s.with_seed(derive_seed(self.seed, 1 + j as u64)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Train(a) => train::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Diagnose(a) => diagnose::run(a),
        Command::Plot(a) => plot::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `cobra --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
