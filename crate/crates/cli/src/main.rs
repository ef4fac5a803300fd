//! `ddasr` — light-field angular super-resolution from the command line.
//!
//! Subcommands: `convert` (SAI↔MacPI), `synth` (constant-disparity scene
//! generation), `infer` (single-model super-resolution), `btas`
//! (block-traversal reconstruction), `eval` (PSNR/SSIM report),
//! `depth-eval` (disparity BP1/BP7/MSE), `visuals`, and `train`.
//! `DDASR_DETERMINISTIC=1` (or `--deterministic`) forces serial,
//! bit-reproducible execution.

mod commands;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ddasr", version, about = "Light-field angular super-resolution toolkit")]
struct Cli {
    /// Force deterministic (serial) execution.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between scene directories and macro-pixel images.
    Convert(commands::ConvertArgs),
    /// Generate a synthetic constant-disparity scene.
    Synth(commands::SynthArgs),
    /// Reconstruct a dense view grid with one model.
    Infer(commands::InferArgs),
    /// Reconstruct via overlapping-block traversal with a local model.
    Btas(commands::BtasArgs),
    /// Score a reconstruction against ground truth (novel views only).
    Eval(commands::EvalArgs),
    /// Score disparity maps (bad-pixel ratios and MSE×100).
    DepthEval(commands::DepthEvalArgs),
    /// Emit center-view, error-map, and EPI-strip images.
    Visuals(commands::VisualsArgs),
    /// Train a model.
    Train(commands::TrainArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.deterministic {
        ddasr_core::runtime::set_deterministic(true);
    }
    match cli.command {
        Command::Convert(args) => commands::convert(args),
        Command::Synth(args) => commands::synth(args),
        Command::Infer(args) => commands::infer(args),
        Command::Btas(args) => commands::btas(args),
        Command::Eval(args) => commands::eval(args),
        Command::DepthEval(args) => commands::depth_eval(args),
        Command::Visuals(args) => commands::visuals(args),
        Command::Train(args) => commands::train(args),
    }
}
