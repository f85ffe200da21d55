//! Command-line pipeline: GLDC training, circular layout, rendering, and
//! evaluation, runnable end to end or one stage at a time.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hchc_core::gldc::{assign_labels, pretrain, train, train_from, Dataset};
use hchc_core::io::{
    self, CycleArtifact, LabelColumn, LoadOptions, RunArtifacts, RunConfig, RunMetrics,
};
use hchc_core::layout::{anchor_positions, build_layout, CircularLayout, CycleOrder};
use hchc_core::metrics::{acc, nmi};
use hchc_core::nn::GldcModel;
use hchc_core::svg::{render_svg, SvgStyle};
use hchc_core::Error;

#[derive(Parser)]
#[command(
    name = "hchc",
    version,
    about = "Deep clustering with a circular cluster layout"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: train, infer probabilities, lay out, render, evaluate.
    Run(RunArgs),
    /// Autoencoder pretraining only; writes model.json.
    Pretrain(TrainArgs),
    /// Clustering training; writes model.json, probabilities.csv and metrics.
    Train(TrainStageArgs),
    /// Circular layout from an existing probabilities.csv.
    Layout(LayoutArgs),
    /// Re-render layout.svg from layout.csv and cycle.json.
    Render(RenderArgs),
    /// ACC and NMI between predicted and true label files.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// First CSV row is a header.
    #[arg(long)]
    has_header: bool,
    /// Column with ground-truth labels, by header name or zero-based index.
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainStageArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Start from a pretrained model.json instead of pretraining in-process.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LayoutArgs {
    /// probabilities.csv (n rows, one column per cluster).
    #[arg(long)]
    probabilities: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// layout.csv from a previous layout stage.
    #[arg(long)]
    layout: PathBuf,
    /// cycle.json from the same stage.
    #[arg(long)]
    cycle: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Canvas width in pixels.
    #[arg(long, default_value_t = 900)]
    width: u32,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted labels, one integer per line.
    #[arg(long)]
    pred: PathBuf,
    /// True labels, one integer per line.
    #[arg(long)]
    truth: PathBuf,
    /// Optional metrics.json destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct StageError {
    stage: &'static str,
    source: Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T> Stage<T> for Result<T, Error> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::TrainingDivergence(_) => 3,
        Error::DegenerateDistance(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Pretrain(args) => cmd_pretrain(args),
        Command::Train(args) => cmd_train(args),
        Command::Layout(args) => cmd_layout(args),
        Command::Render(args) => cmd_render(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(StageError { stage, source }) => {
            eprintln!("error [{stage}]: {source}");
            ExitCode::from(exit_code(&source))
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut config = match &args.config {
        Some(path) => io::parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.training.seed = seed;
    }
    Ok(config)
}

fn load_dataset(args: &DataArgs) -> Result<Dataset, Error> {
    let label_column = args.label_column.as_ref().map(|raw| {
        raw.parse::<usize>()
            .map(LabelColumn::Index)
            .unwrap_or_else(|_| LabelColumn::Name(raw.clone()))
    });
    io::load_csv(
        &args.data,
        &LoadOptions {
            has_header: args.has_header,
            label_column,
        },
    )
}

/// Fills in `clusters` from the label count when the config leaves it unset.
fn resolve_clusters(config: &mut RunConfig, data: &Dataset) -> Result<(), Error> {
    if config.training.clusters.is_none() {
        let labels = data.true_labels.as_ref().ok_or_else(|| {
            Error::Config("clusters is not set and the data has no label column".into())
        })?;
        let c = labels.iter().max().map_or(0, |&m| m + 1);
        if c < 2 {
            return Err(Error::Config(format!(
                "derived cluster count {c} is too small"
            )));
        }
        config.training.clusters = Some(c);
        log::info!("clusters derived from labels: {c}");
    }
    Ok(())
}

fn ground_truth_metrics(data: &Dataset, assigned: &[usize]) -> Result<Option<RunMetrics>, Error> {
    match &data.true_labels {
        None => Ok(None),
        Some(truth) => Ok(Some(RunMetrics {
            acc: acc(assigned, truth)?,
            nmi: nmi(assigned, truth)?,
        })),
    }
}

fn write_model(model: &GldcModel, path: &Path) -> Result<(), Error> {
    let json = serde_json::to_string(model).expect("model serializes");
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_model(path: &Path) -> Result<GldcModel, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        row: e.line(),
        col: e.column(),
        message: e.to_string(),
    })
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn cmd_run(args: RunArgs) -> Result<(), StageError> {
    let mut config = load_config(&args.config).stage("config")?;
    let data = load_dataset(&args.data).stage("load")?;
    resolve_clusters(&mut config, &data).stage("config")?;

    log::info!(
        "training on {} samples, {} features, {} clusters",
        data.n(),
        data.dim(),
        config.training.clusters.unwrap_or(0)
    );
    let (_, probabilities) = train(&data, &config.training).stage("train")?;
    let assigned = assign_labels(&probabilities);
    let metrics = ground_truth_metrics(&data, &assigned).stage("evaluate")?;
    if let Some(m) = &metrics {
        log::info!("ACC {:.4}, NMI {:.4}", m.acc, m.nmi);
    }

    let result = build_layout(&probabilities, &config.layout).stage("layout")?;
    let artifacts = RunArtifacts {
        probabilities,
        assigned,
        layout: result.layout,
        cycle: result.cycle,
        solver: result.solver,
        similarity_score: result.similarity_score,
        metrics,
        config,
    };
    io::write_outputs(&artifacts, &args.out).stage("write")?;
    render_svg(
        &artifacts.layout,
        &artifacts.cycle,
        &artifacts.assigned,
        &args.out.join("layout.svg"),
        &SvgStyle::default(),
    )
    .stage("render")?;
    log::info!("wrote artifacts to {}", args.out.display());
    Ok(())
}

fn cmd_pretrain(args: TrainArgs) -> Result<(), StageError> {
    let mut config = load_config(&args.config).stage("config")?;
    let data = load_dataset(&args.data).stage("load")?;
    resolve_clusters(&mut config, &data).stage("config")?;
    let model = pretrain(&data, &config.training).stage("pretrain")?;
    ensure_dir(&args.out).stage("write")?;
    write_model(&model, &args.out.join("model.json")).stage("write")?;
    io::write_config_json(&config, &args.out.join("config_echo.json")).stage("write")?;
    Ok(())
}

fn cmd_train(args: TrainStageArgs) -> Result<(), StageError> {
    let mut config = load_config(&args.config).stage("config")?;
    let data = load_dataset(&args.data).stage("load")?;
    resolve_clusters(&mut config, &data).stage("config")?;
    let (model, probabilities) = match &args.model {
        Some(path) => {
            let model = read_model(path).stage("load")?;
            train_from(model, &data, &config.training).stage("train")?
        }
        None => train(&data, &config.training).stage("train")?,
    };
    let assigned = assign_labels(&probabilities);
    let metrics = ground_truth_metrics(&data, &assigned).stage("evaluate")?;
    ensure_dir(&args.out).stage("write")?;
    write_model(&model, &args.out.join("model.json")).stage("write")?;
    io::write_probabilities_csv(&probabilities, &args.out.join("probabilities.csv"))
        .stage("write")?;
    if let Some(m) = &metrics {
        io::write_metrics_json(m, &args.out.join("metrics.json")).stage("write")?;
    }
    io::write_config_json(&config, &args.out.join("config_echo.json")).stage("write")?;
    Ok(())
}

fn cmd_layout(args: LayoutArgs) -> Result<(), StageError> {
    let config = load_config(&args.config).stage("config")?;
    let probabilities = io::load_probabilities(&args.probabilities).stage("load")?;
    let assigned = assign_labels(&probabilities);
    let result = build_layout(&probabilities, &config.layout).stage("layout")?;
    ensure_dir(&args.out).stage("write")?;
    io::write_layout_csv(&result.layout, &assigned, &args.out.join("layout.csv"))
        .stage("write")?;
    let cycle = CycleArtifact {
        order: result.cycle.order.clone(),
        angles: result.layout.anchor_angles.clone(),
        s_sam: result.similarity_score,
        solver: result.solver,
        total_cost: result.cycle.total_cost,
    };
    io::write_cycle_json(&cycle, &args.out.join("cycle.json")).stage("write")?;
    render_svg(
        &result.layout,
        &result.cycle,
        &assigned,
        &args.out.join("layout.svg"),
        &SvgStyle::default(),
    )
    .stage("render")?;
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), StageError> {
    let config = load_config(&args.config).stage("config")?;
    let cycle = io::load_cycle_json(&args.cycle).stage("load")?;
    let rows = io::load_layout_csv(&args.layout).stage("load")?;
    let anchors =
        anchor_positions(&cycle.angles, config.layout.radius).stage("layout")?;
    let layout = CircularLayout {
        radius: config.layout.radius,
        anchor_angles: cycle.angles.clone(),
        anchor_coords: anchors,
        sample_coords: rows.sample_coords,
        outlier_flags: rows.outlier_flags,
    };
    let order = CycleOrder {
        order: cycle.order.clone(),
        total_cost: cycle.total_cost,
    };
    render_svg(
        &layout,
        &order,
        &rows.assigned,
        &args.out,
        &SvgStyle {
            width_px: args.width,
        },
    )
    .stage("render")
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), StageError> {
    let pred = io::load_labels(&args.pred).stage("load")?;
    let truth = io::load_labels(&args.truth).stage("load")?;
    let metrics = RunMetrics {
        acc: acc(&pred, &truth).stage("evaluate")?,
        nmi: nmi(&pred, &truth).stage("evaluate")?,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&metrics).expect("metrics serialize")
    );
    if let Some(path) = &args.out {
        io::write_metrics_json(&metrics, path).stage("write")?;
    }
    Ok(())
}
