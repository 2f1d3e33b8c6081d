//! `rems`: batch driver for scene files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod output;
mod scene;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Axis, ChannelArgs, GainPatternArgs, SweepKind};
use error::{CliError, CliResult};
use scene::Scene;

#[derive(Debug, Parser)]
#[command(name = "rems", version, about = "Reconfigurable electromagnetic structure modeling")]
struct Cli {
    /// Scene description (TOML).
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "REMS_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides the seed of an optimization problem.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative tolerance for the consistency checks of `solve`.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the scene's direction grid and quadrature weights.
    Grid,
    /// Extract a kernel bundle from a plane-wave response file.
    Extract {
        responses: PathBuf,
        /// Touchstone file with the port coupling matrix.
        #[arg(long)]
        coupling: Option<PathBuf>,
        /// Output file name.
        #[arg(long)]
        output: Option<String>,
    },
    /// Solve a model for its PA drive and report powers and efficiencies.
    Solve {
        #[arg(long)]
        model: String,
    },
    /// Far-field channel between two structures over a sweep.
    Channel {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, value_enum, default_value = "rotation")]
        sweep: SweepKind,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        start: f64,
        #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
        stop: f64,
        #[arg(long, default_value_t = 91)]
        points: usize,
        /// Rotation axis for rotation sweeps.
        #[arg(long, value_enum, default_value = "los")]
        axis: Axis,
        #[arg(long, default_value_t = 0)]
        tx_port: usize,
        #[arg(long, default_value_t = 0)]
        rx_port: usize,
        #[arg(long)]
        output: Option<String>,
    },
    /// REMS gain along a great-circle slice.
    GainPattern {
        #[arg(long)]
        model: String,
        /// Azimuth of the slice, degrees.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi: f64,
        /// Elevation step, degrees.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// Beamforming result supplying the loads and the drive.
        #[arg(long)]
        result: Option<PathBuf>,
        /// Precoder column used as the drive.
        #[arg(long, default_value_t = 0)]
        column: usize,
        #[arg(long)]
        output: Option<String>,
    },
    /// Run joint impedance tuning and zero-forcing precoding.
    Optimize {
        #[arg(long)]
        problem: String,
        /// Elevation step of the gain-pattern slices, degrees.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
}

fn load_scene(path: Option<&Path>) -> CliResult<Scene> {
    let path = path.ok_or_else(|| CliError::Config("this command needs --scene <file>".into()))?;
    Scene::load(path)
}

fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Extract {
            responses,
            coupling,
            output,
        } => commands::extract(responses, coupling.as_deref(), output.as_deref(), out),
        Command::Grid => commands::grid(&load_scene(cli.scene.as_deref())?, out),
        Command::Solve { model } => commands::solve(&load_scene(cli.scene.as_deref())?, model, cli.tol, out),
        Command::Channel {
            from,
            to,
            sweep,
            start,
            stop,
            points,
            axis,
            tx_port,
            rx_port,
            output,
        } => commands::channel(
            &load_scene(cli.scene.as_deref())?,
            &ChannelArgs {
                from,
                to,
                sweep: *sweep,
                start: *start,
                stop: *stop,
                points: *points,
                axis: *axis,
                tx_port: *tx_port,
                rx_port: *rx_port,
                output: output.as_deref(),
            },
            out,
        ),
        Command::GainPattern {
            model,
            phi,
            step,
            result,
            column,
            output,
        } => commands::gain_pattern(
            &load_scene(cli.scene.as_deref())?,
            &GainPatternArgs {
                model,
                phi: *phi,
                step: *step,
                result: result.as_deref(),
                column: *column,
                output: output.as_deref(),
            },
            out,
        ),
        Command::Optimize { problem, step } => {
            commands::optimize(&load_scene(cli.scene.as_deref())?, problem, cli.seed, *step, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
