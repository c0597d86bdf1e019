mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use downscaler_core::Error;

/// Coastal downscaling pipeline: simulate, pair, train, evaluate, report.
#[derive(Parser, Debug)]
#[command(name = "st-downscaler", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the shallow-water solver and write a CSF directory.
    Simulate(SimulateArgs),
    /// Pair a coarse and a fine CSF run into a split dataset.
    MakeDataset(MakeDatasetArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Score a checkpoint and the interpolation baseline on one split.
    Eval(EvalArgs),
    /// Predict three fine frames from two coarse CSF frames.
    Infer(InferArgs),
    /// Train every cell of an ablation matrix and tabulate test scores.
    Ablate(AblateArgs),
    /// Per-frame metric table and residual maps from an eval directory.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Resolution {
    Coarse,
    Fine,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// JSON document with optional `sim`, `basin` and `seed` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSF directory.
    #[arg(long)]
    out: PathBuf,
    /// `fine` doubles the grid and halves dx, dy and dt.
    #[arg(long, value_enum, default_value_t = Resolution::Coarse)]
    resolution: Resolution,
    /// Seed for randomized initial conditions (falls back to ST_DOWNSCALER_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-key override such as `sim.t_end=3600`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct MakeDatasetArgs {
    #[arg(long)]
    coarse: PathBuf,
    #[arg(long)]
    fine: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training patch side in pixels.
    #[arg(long, default_value_t = 64)]
    patch: usize,
    /// Train:val:test proportions.
    #[arg(long, default_value = "6:2:2")]
    split: String,
    /// Split seed (falls back to ST_DOWNSCALER_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Enabled augmentations: any of h (flip), v (flip), r (rotate), t (time
    /// reversal), or `none`.
    #[arg(long, default_value = "hvrt")]
    augment: String,
    /// Rendered image size as HxW; defaults to the coarse grid.
    #[arg(long)]
    size: Option<String>,
}

#[derive(Args, Debug)]
struct StageConfigArgs {
    /// Model config JSON (defaults to the desk preset).
    #[arg(long)]
    model_cfg: Option<PathBuf>,
    /// Training config JSON (defaults to the desk preset).
    #[arg(long)]
    train_cfg: Option<PathBuf>,
    /// Training seed (falls back to ST_DOWNSCALER_SEED, then the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Override such as `train.lr=2e-4` or `model.axes.d=false`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset directory written by make-dataset.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: StageConfigArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    out: PathBuf,
    /// Samples per forward pass.
    #[arg(long, default_value_t = 4)]
    batch: usize,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Two CSF frame files, earlier first.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    frames: Vec<PathBuf>,
    /// CSF directory providing meta.json, mask.bin and bathy.bin; defaults to
    /// the directory of the first frame.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// JSON `{"cells": [{...flags...}, ...]}`.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Split the cells are scored on.
    #[arg(long, default_value = "test")]
    split: String,
    #[command(flatten)]
    cfg: StageConfigArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    eval_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Residual amplification before 8-bit quantization.
    #[arg(long, default_value_t = 50.0)]
    gain: f64,
    /// Number of samples that get residual maps.
    #[arg(long, default_value_t = 4)]
    max_maps: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::MakeDataset(a) => commands::make_dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Infer(a) => commands::infer(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_user_error() {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}
