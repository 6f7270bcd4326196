//! `aeot`: train and sample from an autoencoder + optimal-transport generator.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aeot", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eight-Gaussian experiment: train a potential in 2-D and write figure
    /// data, a checkpoint and metrics.
    Toy(ToyArgs),
    /// Train the autoencoder on IDX images.
    TrainAe(TrainAeArgs),
    /// Train the potential network on the autoencoder's latent codes.
    TrainOt(TrainOtArgs),
    /// Generate images from noise.
    Generate(GenerateArgs),
    /// Decode a straight line between two transported noise samples.
    Interpolate(InterpolateArgs),
    /// Energy distance (and, for 2-D points, mode coverage) between two sets.
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct Common {
    /// JSON file with default values; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ToyArgs {
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
pub struct TrainAeArgs {
    /// IDX image file [default: $AEOT_DATA_DIR/train-images-idx3-ubyte].
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use only the first N images.
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
pub struct TrainOtArgs {
    /// Directory written by `train-ae`.
    #[arg(long)]
    ae_checkpoint: PathBuf,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: the autoencoder directory].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from a potential checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Write the first batch's cost matrix and optimal plan as CSV.
    #[arg(long)]
    dump_ot_instance: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Directory holding `decoder.json` and `potential.json`.
    #[arg(long)]
    checkpoints: PathBuf,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    checkpoints: PathBuf,
    /// Two noise seeds, e.g. `3,7`.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// CSV points or IDX images.
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    generated: PathBuf,
    /// Metrics JSON file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Toy(a) => commands::toy(a),
        Command::TrainAe(a) => commands::train_ae(a),
        Command::TrainOt(a) => commands::train_ot(a),
        Command::Generate(a) => commands::generate(a),
        Command::Interpolate(a) => commands::interpolate(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
