mod commands;
mod eval;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seglep::calibrate::CalibrateError;
use seglep::engine::EngineError;
use seglep::metrics::Metric;
use seglep::pipeline::PipelineError;
use seglep::raster::RasterError;

/// Hierarchical segmentation driven by dense semantic cues.
#[derive(Debug, Parser)]
#[command(name = "seglep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment one image at a stop threshold.
    Segment(SegmentArgs),
    /// Run to a single region and export the UCM and a threshold sweep.
    Hierarchy(HierarchyArgs),
    /// Score label maps or sweeps against annotator label maps.
    Eval(EvalArgs),
    /// Fit engine parameters on an annotated training directory.
    Calibrate(CalibrateArgs),
    /// Paint region boundaries over an image.
    Overlay(OverlayArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// RGB image (binary PPM).
    #[arg(long)]
    image: PathBuf,
    /// Semantic map (SEMMAP01 with a JSON sidecar).
    #[arg(long)]
    semmap: PathBuf,
    /// Contour map (CONMAP01 or PGM). Missing means no contours.
    #[arg(long)]
    contour: Option<PathBuf>,
    /// Pipeline configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Stop threshold; overrides the configuration.
    #[arg(long)]
    lambda: Option<f64>,
    /// Also write the per-pixel category map.
    #[arg(long)]
    emit_semantic: bool,
    /// Also write the boundary overlay.
    #[arg(long)]
    emit_overlay: bool,
}

#[derive(Debug, Args)]
struct HierarchyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of thresholds, taken as quantiles of this image's merge levels.
    #[arg(long, default_value_t = 10, conflicts_with = "lambdas")]
    levels: usize,
    /// Explicit thresholds, e.g. to share one grid across a dataset.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Label map or sweep index (sweep.json), once per image.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Directory of annotator label maps (*.pgm), once per image in the
    /// same order as --pred.
    #[arg(long, required = true)]
    gt_dir: Vec<PathBuf>,
    /// Boundary matching tolerance in pixels. Defaults to 0.75% of the
    /// image diagonal.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Directory of sample directories, each holding image.ppm, semmap.bin
    /// (+ semmap.json), optionally contour.bin or contour.pgm, and gt/*.pgm.
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "covering", value_parser = parse_metric)]
    objective: Metric,
    /// Where to write the fitted configuration.
    #[arg(long)]
    out: PathBuf,
    /// Score trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Starting configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Search space JSON; defaults to the built-in grids.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Thresholds swept per configuration.
    #[arg(long, default_value_t = 24)]
    levels: usize,
}

#[derive(Debug, Args)]
struct OverlayArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
}

/// 2 for anything the caller can fix by changing inputs or flags, 1 for
/// everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<inputs::InputError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<RasterError>() {
            return if matches!(e, RasterError::IoFailure(_)) {
                1
            } else {
                2
            };
        }
        if let Some(e) = cause.downcast_ref::<EngineError>() {
            return match e {
                EngineError::DimensionMismatch(_) | EngineError::InvalidConfig(_) => 2,
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return match e {
                PipelineError::Hierarchy(_) => 1,
                PipelineError::Raster(RasterError::IoFailure(_)) => 1,
                PipelineError::Engine(inner) => match inner {
                    EngineError::DimensionMismatch(_) | EngineError::InvalidConfig(_) => 2,
                    _ => 1,
                },
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<CalibrateError>() {
            return match e {
                CalibrateError::Pipeline(_) => continue,
                _ => 2,
            };
        }
        if cause.is::<seglep::metrics::MetricError>() || cause.is::<seglep::cues::CueError>() {
            return 2;
        }
    }
    1
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("SEGLEP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| inputs::InputError(format!("SEGLEP_THREADS must be a count, got {raw:?}")))?;
    // 0 leaves the pool at its automatic size.
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Segment(a) => commands::segment(a),
        Command::Hierarchy(a) => commands::hierarchy(a),
        Command::Eval(a) => eval::run(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Overlay(a) => commands::overlay(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
