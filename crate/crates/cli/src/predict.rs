use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use cobra_ensemble::archive::ModelArchive;
use cobra_ensemble::data::load_features_csv;

use crate::output::{emit, fail, CliResult};

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Archive written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Features-only CSV, columns in training order.
    #[arg(long)]
    pub data: PathBuf,
    /// Output file (one prediction per line); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: PredictArgs) -> CliResult {
    let archive = ModelArchive::load(&args.model)?;
    let d = archive.model.dim();
    let queries = load_features_csv(&args.data, d)?;
    if queries.cols() != d {
        return Err(fail(format!(
            "{}: query has {} feature columns, the model expects {d}",
            args.data.display(),
            queries.cols()
        )));
    }
    let predictions = archive
        .model
        .predict_strings(&queries)
        .with_context(|| format!("predicting {}", args.data.display()))?;
    let mut text = String::new();
    for p in predictions {
        text.push_str(&p);
        text.push('\n');
    }
    emit(args.out.as_deref(), &text)?;
    Ok(())
}
