use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use cobra_ensemble::archive::{ArchivedModel, ModelArchive};
use cobra_ensemble::data::load_numeric_csv;
use cobra_ensemble::diagnostics::{boxplot_stats, qq_points, MachineErrors};
use cobra_ensemble::geometry::{build_voronoi, default_bbox, BoundingBox, Point};
use cobra_ensemble::plots::{render_boxplots, render_qq, render_voronoi, to_svg_string, Coloring};
use cobra_ensemble::{load_csv, ColumnRef, Dataset, Task};

use crate::output::{fail, usage, write_atomic, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Residual boxplots of every machine and the aggregate.
    Boxplot,
    /// Sorted aggregate predictions against sorted responses.
    Qq,
    /// Tessellation of a sites CSV, or of 2-D test points colored by the
    /// machine closest to each response.
    Voronoi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ColoringKind {
    Labels,
    Scalars,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(value_enum)]
    pub kind: PlotKind,
    /// Archive written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Labelled test CSV (same layout as the training data).
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Response column of the test CSV; defaults to the training response.
    #[arg(long)]
    pub response: Option<String>,
    /// Sites CSV for a standalone tessellation: `x,y[,value]`.
    #[arg(long, conflicts_with_all = ["model", "test"])]
    pub sites: Option<PathBuf>,
    /// How the third sites column colors the cells.
    #[arg(long, value_enum, default_value = "labels")]
    pub coloring: ColoringKind,
    /// Bounding box `xmin,ymin,xmax,ymax`; the padded site extent by default.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub bbox: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Archive plus test data with labels aligned to the archive.
fn model_and_test(args: &PlotArgs) -> CliResult<(ModelArchive, Dataset)> {
    let (Some(model), Some(test)) = (&args.model, &args.test) else {
        return Err(usage("this plot needs --model and --test"));
    };
    let archive = ModelArchive::load(model)?;
    let column = ColumnRef::from(args.response.as_deref().unwrap_or(&archive.response_name));
    let mut data = load_csv(test, &column, archive.model.task())?;
    if let ArchivedModel::ClassifierCobra(m) = &archive.model {
        data = data.with_label_universe(m.label_names())?;
    }
    Ok((archive, data))
}

fn actual(data: &Dataset) -> Vec<f64> {
    match data.task() {
        Task::Regression => data.responses().map(<[f64]>::to_vec).unwrap_or_default(),
        Task::Classification => data
            .labels()
            .map(|l| l.iter().map(|&v| v as f64).collect())
            .unwrap_or_default(),
    }
}

/// Aggregate predictions as reals (label indices for classifiers).
fn aggregate_predictions(model: &ArchivedModel, data: &Dataset) -> CliResult<Vec<f64>> {
    Ok(match model {
        ArchivedModel::Cobra(m) => m.predict_batch(data.features())?,
        ArchivedModel::Ewa(m) => m.predict_batch(data.features())?,
        ArchivedModel::ClassifierCobra(m) => m
            .predict_batch(data.features())?
            .into_iter()
            .map(|l| l as f64)
            .collect(),
    })
}

fn kind_name(model: &ArchivedModel) -> &'static str {
    match model {
        ArchivedModel::Cobra(_) => "cobra",
        ArchivedModel::Ewa(_) => "ewa",
        ArchivedModel::ClassifierCobra(_) => "classifier_cobra",
    }
}

/// Per-machine and aggregate residuals on the test data, aggregate last.
pub fn residual_table(model: &ArchivedModel, data: &Dataset) -> CliResult<Vec<MachineErrors>> {
    let y = actual(data);
    let mut out = cobra_ensemble::diagnostics::machine_errors(model.machines(), data)?;
    out.push(MachineErrors::from_predictions(
        kind_name(model),
        &aggregate_predictions(model, data)?,
        &y,
        data.task(),
    )?);
    Ok(out)
}

fn bbox(args: &PlotArgs, sites: &[Point]) -> CliResult<BoundingBox> {
    Ok(match &args.bbox {
        Some(b) if b.len() == 4 => BoundingBox::new(b[0], b[1], b[2], b[3])?,
        Some(b) => return Err(usage(format!("--bbox takes 4 values, got {}", b.len()))),
        None => default_bbox(sites)?,
    })
}

fn sites_diagram(args: &PlotArgs, path: &Path) -> CliResult<String> {
    let (_, m) = load_numeric_csv(path)?;
    if !(2..=3).contains(&m.cols()) {
        return Err(fail(format!(
            "{}: expected 2 or 3 columns (x, y[, value]), found {}",
            path.display(),
            m.cols()
        )));
    }
    let sites: Vec<Point> = m.iter_rows().map(|r| [r[0], r[1]]).collect();
    let coloring = match (m.cols(), args.coloring) {
        (2, _) => Coloring::Labels((0..sites.len()).collect()),
        (_, ColoringKind::Scalars) => Coloring::Scalars(m.iter_rows().map(|r| r[2]).collect()),
        (_, ColoringKind::Labels) => Coloring::Labels(
            m.iter_rows()
                .enumerate()
                .map(|(i, r)| {
                    let v = r[2];
                    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                        Ok(v as usize)
                    } else {
                        Err(anyhow::anyhow!(
                            "{}: site {i} label {v} is not a non-negative integer",
                            path.display()
                        ))
                    }
                })
                .collect::<anyhow::Result<Vec<_>>>()?,
        ),
    };
    let diagram = build_voronoi(&sites, bbox(args, &sites)?)?;
    Ok(to_svg_string(&render_voronoi(
        &diagram,
        &coloring,
        "Voronoi tessellation",
    )?))
}

/// Test points colored by the index of the machine whose prediction is
/// closest to the response (ties to the earlier machine).
fn selection_diagram(args: &PlotArgs) -> CliResult<String> {
    let (archive, data) = model_and_test(args)?;
    if data.dim() != 2 {
        return Err(fail(format!(
            "a Voronoi plot of test points needs 2 features, the data has {}",
            data.dim()
        )));
    }
    let y = actual(&data);
    let machines = archive.model.machines();
    let mut best = Vec::with_capacity(data.len());
    for (i, yi) in y.iter().enumerate() {
        let mut choice = (0, f64::INFINITY);
        for (j, m) in machines.iter().enumerate() {
            let err = (m.predict(data.row(i))?.as_f64() - yi).abs();
            if err < choice.1 {
                choice = (j, err);
            }
        }
        best.push(choice.0);
    }
    let sites: Vec<Point> = data.features().iter_rows().map(|r| [r[0], r[1]]).collect();
    let diagram = build_voronoi(&sites, bbox(args, &sites)?)?;
    Ok(to_svg_string(&render_voronoi(
        &diagram,
        &Coloring::Labels(best),
        "Best machine per test point",
    )?))
}

pub fn run(args: PlotArgs) -> CliResult {
    let svg = match args.kind {
        PlotKind::Boxplot => {
            let (archive, data) = model_and_test(&args)?;
            let summaries = residual_table(&archive.model, &data)?
                .into_iter()
                .map(|e| Ok((e.name.clone(), boxplot_stats(&e.residuals)?)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            to_svg_string(&render_boxplots(&summaries, "Residuals on test data"))
        }
        PlotKind::Qq => {
            let (archive, data) = model_and_test(&args)?;
            let predicted = aggregate_predictions(&archive.model, &data)?;
            let pts = qq_points(&predicted, &actual(&data))?;
            to_svg_string(&render_qq(
                &pts,
                &format!("QQ-plot of {} predictions", kind_name(&archive.model)),
            ))
        }
        PlotKind::Voronoi => match &args.sites {
            Some(path) => sites_diagram(&args, path)?,
            None => selection_diagram(&args)?,
        },
    };
    write_atomic(&args.out, svg.as_bytes())?;
    Ok(())
}
