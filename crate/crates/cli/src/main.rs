use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use vinecut_cli::run::EXIT_FATAL;
use vinecut_cli::{cmd_bench, cmd_run, synth, BenchArgs, RunArgs};
use vinecut_core::synthetic::SceneSpec;

/// Grapevine plant modelling and pruning-point generation.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model one annotated scene and place its pruning points.
    #[command(group(ArgGroup::new("depth_source").required(true).args(["depth", "constant_depth"])))]
    Run {
        /// COCO instance-segmentation JSON (polygons).
        #[arg(long)]
        annotations: PathBuf,
        /// 16-bit single-channel depth PNG aligned with the annotations.
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Uniform depth in meters, when no depth image exists.
        #[arg(long, value_name = "METERS")]
        constant_depth: Option<f64>,
        /// Key-value config file; must set the camera.* intrinsics.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_overlay: bool,
        /// Image to process in a multi-image annotation file (ID or file name).
        #[arg(long)]
        image_id: Option<String>,
        /// PNG drawn under the overlay.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Score the pipeline over a grid of synthetic scenes.
    Bench {
        /// JSON grid file.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write a synthetic scene (annotations, depth, config) for `run`.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the fixed five-spur layout instead of a randomized one.
        #[arg(long, conflicts_with = "spec")]
        five_spurs: bool,
        /// Scene spec JSON, as written by this command.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn synth_cmd(seed: u64, five_spurs: bool, spec: Option<PathBuf>, out: PathBuf) -> anyhow::Result<()> {
    let spec = match spec {
        Some(p) => serde_json::from_slice(&std::fs::read(&p)?)?,
        None if five_spurs => SceneSpec::five_spurs(seed),
        None => SceneSpec::randomized(seed),
    };
    synth::write_scene(&spec, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VINECUT_LOG", "warn")).init();
    let code = match Cli::parse().command {
        Command::Run { annotations, depth, constant_depth, config, out, no_overlay, image_id, image } => {
            cmd_run(&RunArgs {
                annotations,
                depth,
                constant_depth_m: constant_depth,
                config,
                out,
                no_overlay,
                image_id,
                image,
            })
        }
        Command::Bench { grid, out, jobs } => cmd_bench(&BenchArgs { grid, out, jobs }),
        Command::Synth { seed, five_spurs, spec, out } => match synth_cmd(seed, five_spurs, spec, out) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_FATAL
            }
        },
    };
    ExitCode::from(code as u8)
}
