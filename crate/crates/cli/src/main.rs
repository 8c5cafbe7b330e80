//! `robench`: benchmark how stable a detector's accuracy is under
//! compression, down-scaling, noise and brightness changes.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robench::distortion::DistortionKind;
use robench::quadrangle::{DEFAULT_HALF_WIDTH, DEFAULT_LAMBDA};
use robench::stability::DEFAULT_OMEGA;

/// Exit status for invalid arguments or configuration.
const EXIT_USAGE: u8 = 2;
/// Exit status for problems with the data being processed.
const EXIT_DATA: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "robench", version, about = "Detector robustness benchmarking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic reference sequence with ground truth.
    Synth(SynthArgs),
    /// Build distortion ladders from a reference sequence.
    Distort(DistortArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Compute stability from per-sequence accuracies and draw the quadrangle chart.
    Stability(StabilityArgs),
    /// Rank detectors from several run reports.
    Report(ReportArgs),
    /// Train the reference detector on a synthetic scene.
    Train(TrainArgs),
    /// Run the reference detector on a sequence.
    Detect(DetectArgs),
    /// Synthesize, distort, detect, evaluate and report in one go.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scene configuration (JSON); defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scene's texture seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DistortArgs {
    /// Manifest of the reference sequence.
    #[arg(long)]
    reference: PathBuf,
    /// Ladder configuration (JSON); defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "qp,res,wn,bv")]
    kinds: Vec<DistortionKind>,
    /// Overrides the white-noise base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Write the miss-rate/FPPI curve as CSV.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Tag the result with this sequence's id and distortion.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = robench::detector::DEFAULT_DETECTOR_ID)]
    detector_id: String,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    /// Accuracy JSON files or directories searched for `accuracy.json`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_OMEGA)]
    omega: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = DEFAULT_HALF_WIDTH)]
    half_width: f64,
    #[arg(long)]
    svg_out: Option<PathBuf>,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Run reports (JSON).
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Overrides the λ stored in the reports for the chart.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_HALF_WIDTH)]
    half_width: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Scene configuration (JSON) the training scene is derived from.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (JSON with optional `scene` and `ladder` sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Detector model; trained on a companion scene when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "qp,res,wn,bv")]
    kinds: Vec<DistortionKind>,
    /// Overrides both the scene texture seed and the noise seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_OMEGA)]
    omega: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Distort(a) => commands::distort(a),
        Command::Eval(a) => commands::eval(a),
        Command::Stability(a) => commands::stability(a),
        Command::Report(a) => commands::report(a),
        Command::Train(a) => commands::train(a),
        Command::Detect(a) => commands::detect(a),
        Command::Run(a) => commands::run(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { EXIT_USAGE } else { EXIT_DATA })
        }
    }
}
