use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use shapr::dataset::Task;
use shapr::eval::ModelKind;
use shapr::simulator::Scenario;
use shapr::spectrum::{DEFAULT_FRAME_BYTES, DEFAULT_START_HZ, DEFAULT_STEP_HZ, DEFAULT_STOP_HZ};

mod commands;

const DATASET_FORMAT: &str = "\
Dataset CSV:
  sample_id,task,label,x,y,f_<sensor>_<band>,...
  x,y are empty for category tasks. Feature columns are sensor-major with
  ascending band index; powers are dB with 9 significant digits.";

const SPLIT_FORMAT: &str = "\
Split manifest:
  one line per sample, `train <sample_id>` or `test <sample_id>`.";

const MODEL_FORMAT: &str = "\
Model file:
  plain text starting with `SHAPR1 <knn|dt|rfr|gpr>`, numbers written with
  17 significant digits so a reload predicts identically.";

const IQ_FORMAT: &str = "\
IQ directory:
  labels.csv with header `sample_id,label,x,y`, plus one <sample_id>.shiq
  per sample. A .shiq file is a sequence of records, each `SHIQ` then
  little-endian u32 sensor_id, u64 center_freq_hz, u64 sample_rate_hz,
  u32 byte_count and byte_count unsigned 8-bit interleaved I/Q bytes.
  Every sample needs one frame per band center for each sensor.";

const REPORT_FORMAT: &str = "\
Report CSV:
  `metric,value` summary lines (task, model, train_samples, test_samples and
  accuracy, or mean_error_m/rmse_m/max_error_m for coord-loc), then a
  `sample_id,true,pred[,err_m]` header and one row per test sample.
  Coordinates print as `x;y`.
Confusion CSV:
  header `true\\pred,<labels...>`, one row of counts per true label.";

const PREDICTIONS_FORMAT: &str = "\
Predictions CSV:
  header `sample_id,pred`; coordinates print as `x;y`.";

const ABLATION_FORMAT: &str = "\
Ablation CSV:
  header `sensors,accuracy,seed`, one row per (sensor count, seed).";

#[derive(Parser, Debug)]
#[command(name = "shapr", version, about = "Passive RF human sensing pipeline")]
#[command(after_help = "Exit status: 0 success, 1 usage error, 2 data or validation error.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled dataset from a simulated room.
    #[command(after_help = help_text(&[DATASET_FORMAT, IQ_FORMAT, SCENE_FORMAT]))]
    Simulate(SimulateArgs),
    /// Turn a directory of IQ captures into a dataset.
    #[command(after_help = help_text(&[IQ_FORMAT, DATASET_FORMAT]))]
    Featurize(FeaturizeArgs),
    /// Write a train/test split manifest.
    #[command(after_help = help_text(&[DATASET_FORMAT, SPLIT_FORMAT]))]
    Split(SplitArgs),
    /// Fit a model on the train side of a split.
    #[command(after_help = help_text(&[DATASET_FORMAT, SPLIT_FORMAT, MODEL_FORMAT]))]
    Train(TrainArgs),
    /// Predict every sample (or the test side of a split).
    #[command(after_help = help_text(&[MODEL_FORMAT, DATASET_FORMAT, PREDICTIONS_FORMAT]))]
    Predict(PredictArgs),
    /// Score a model on the test side of a split.
    #[command(after_help = help_text(&[MODEL_FORMAT, SPLIT_FORMAT, REPORT_FORMAT]))]
    Eval(EvalArgs),
    /// Accuracy as a function of how many sensors are used.
    #[command(after_help = help_text(&[DATASET_FORMAT, SPLIT_FORMAT, ABLATION_FORMAT]))]
    Ablate(AblateArgs),
}

const SCENE_FORMAT: &str = "\
Scene file:
  sections [room] [sensors] [transmitters] [subjects] [activities] [noise]
  [seed] holding `key = value` lines, e.g.
    [room]      width = 6.0 / height = 5.0 / anchor = 3.0, 2.5
    [sensors]   0 = 5.6, 1.0
    [transmitters] tv = 0.3, 0.4
    [subjects]  alice = radius, base, amplitude, cycles, phase
    [activities] walking = x, y, posture; x, y, posture
    [noise]     sigma_db = 1.0
    [seed]      value = 42";

fn help_text(parts: &[&str]) -> String {
    parts.join("\n\n")
}

#[derive(Args, Debug, Clone, Copy)]
struct BandArgs {
    /// First band center in Hz.
    #[arg(long, default_value_t = DEFAULT_START_HZ)]
    band_start: u64,
    /// Last band center in Hz.
    #[arg(long, default_value_t = DEFAULT_STOP_HZ)]
    band_stop: u64,
    /// Spacing between band centers in Hz.
    #[arg(long, default_value_t = DEFAULT_STEP_HZ)]
    band_step: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// auth | grid-loc | coord-loc | activity
    #[arg(long)]
    task: Task,
    /// Subjects, grid cells or activities. Defaults to 7, 4, 20 or 8 by task.
    #[arg(long)]
    categories: Option<usize>,
    /// Samples per category.
    #[arg(long, default_value_t = 20)]
    per_category: usize,
    /// Seed for the scene and every sample.
    #[arg(long)]
    seed: u64,
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Scene file; replaces the built-in room for the task.
    #[arg(long, conflicts_with = "scenario")]
    scene: Option<PathBuf>,
    /// Built-in room: laboratory | living-room | classroom | vehicle.
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Override the measurement noise std-dev in dB.
    #[arg(long)]
    noise_db: Option<f64>,
    #[command(flatten)]
    bands: BandArgs,
    /// Also write labels.csv and one .shiq capture per sample into this directory.
    #[arg(long)]
    emit_iq: Option<PathBuf>,
    /// Bytes per synthesized IQ frame.
    #[arg(long, default_value_t = DEFAULT_FRAME_BYTES)]
    frame_bytes: usize,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    /// Directory with labels.csv and <sample_id>.shiq files.
    #[arg(long)]
    input: PathBuf,
    /// auth | grid-loc | coord-loc | activity
    #[arg(long)]
    task: Task,
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    bands: BandArgs,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Manifest to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Per-class train fraction for a stratified split.
    #[arg(long, default_value_t = 0.7, conflicts_with = "holdout_locations")]
    train_fraction: f64,
    /// Hold out every sample at this many random locations (coord-loc only).
    #[arg(long)]
    holdout_locations: Option<usize>,
}

#[derive(Args, Debug, Clone, Copy)]
struct ModelArgs {
    /// Neighbours for knn; must be odd.
    #[arg(long, default_value_t = shapr::classifiers::DEFAULT_K)]
    k: usize,
    /// Trees in the forest.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Depth limit for dt and rfr; unlimited when omitted.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Features tried per split; all for dt and ceil(sqrt(d)) for rfr when omitted.
    #[arg(long)]
    max_features: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// knn | dt | rfr | gpr
    #[arg(long)]
    model: ModelKind,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    params: ModelArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model file from `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Restrict to the test side of this manifest.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Predictions CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Report CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the confusion matrix here (classification tasks).
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// knn | dt | rfr
    #[arg(long)]
    model: ModelKind,
    /// Strictly increasing sensor counts; all prefixes when omitted.
    #[arg(long, value_delimiter = ',')]
    sensors: Vec<usize>,
    /// Training seeds, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Ablation CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    params: ModelArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
