//! surfconv: depth-discretized multi-scale processing of RGBD frames.
//!
//! Subcommands compose into the pipeline
//! synth -> fit-d4 -> pyramid -> train -> infer -> eval,
//! with densify, hha, and occupancy as standalone stages. Every command is
//! deterministic given identical inputs, config, and seed, and fails with a
//! single-line `error: ...` message on stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::Config;

#[derive(Parser)]
#[command(name = "surfconv", version, about = "SurfConv pipeline driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

/// Flags shared by every subcommand. Values override the config file,
/// which overrides built-in defaults.
#[derive(Args)]
struct GlobalArgs {
    /// Flat key=value config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// D4 importance exponent.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Number of discretization levels.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Surface receptive-field radius in meters.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap; falls back to SURFCONV_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Keep RGB outside each pyramid level's mask instead of zeroing it.
    #[arg(long, global = true)]
    keep_context: bool,
    /// Training loss: uniform or r (image-area reweighted).
    #[arg(long, global = true, value_parser = ["uniform", "r"])]
    loss: Option<String>,
    /// Output file or directory (which one depends on the subcommand).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic scenes to RGB, depth, and label files.
    Synth(commands::synth::SynthArgs),
    /// Fit a D4 depth partition from one or more depth images.
    FitD4(commands::fit_d4::FitD4Args),
    /// Build a depth-aware pyramid and dump it to a directory.
    Pyramid(commands::pyramid::PyramidArgs),
    /// Densify sparse depth samples by triangulation.
    Densify(commands::densify::DensifyArgs),
    /// Compute the HHA encoding of a depth image.
    Hha(commands::hha::HhaArgs),
    /// Train a shared-weight SegNet on pyramid dumps.
    Train(commands::train::TrainArgs),
    /// Predict full-resolution label maps from pyramid dumps.
    Infer(commands::infer::InferArgs),
    /// Evaluate predicted label maps against ground truth.
    Eval(commands::eval::EvalArgs),
    /// Report voxel-occupancy fractions of a point cloud.
    Occupancy(commands::occupancy::OccupancyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // One line, `error:` prefix, causes chained with ': '.
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.global.threads)?;

    let mut cfg = Config::default();
    if let Some(path) = &cli.global.config {
        cfg.apply_file(path)?;
    }
    apply_flags(&mut cfg, &cli.global)?;

    let out = cli.global.out;
    match cli.command {
        Command::Synth(args) => commands::synth::run(&args, &cfg, out),
        Command::FitD4(args) => commands::fit_d4::run(&args, &cfg, out),
        Command::Pyramid(args) => commands::pyramid::run(&args, &cfg, out),
        Command::Densify(args) => commands::densify::run(&args, &cfg, out),
        Command::Hha(args) => commands::hha::run(&args, &cfg, out),
        Command::Train(args) => commands::train::run(&args, &cfg, out),
        Command::Infer(args) => commands::infer::run(&args, &cfg, out),
        Command::Eval(args) => commands::eval::run(&args, &cfg, out),
        Command::Occupancy(args) => commands::occupancy::run(&args, &cfg, out),
    }
}

fn apply_flags(cfg: &mut Config, flags: &GlobalArgs) -> Result<()> {
    if let Some(v) = flags.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = flags.levels {
        cfg.levels = v;
    }
    if let Some(v) = flags.delta {
        cfg.delta_sf = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if flags.keep_context {
        cfg.keep_context = true;
    }
    if let Some(v) = &flags.loss {
        cfg.loss = config::parse_loss(v)?;
    }
    Ok(())
}

/// Caps the rayon pool before any parallel work runs. Priority: --threads,
/// then SURFCONV_THREADS, then the rayon default (all cores).
fn init_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("SURFCONV_THREADS") {
            Ok(v) => Some(
                v.parse()
                    .with_context(|| format!("SURFCONV_THREADS='{v}'"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing thread pool")?;
    }
    Ok(())
}
