//! `plantbridge`: inspect plant libraries, train and evaluate policies,
//! deploy them against the mock HIL backend and plot the results.
//!
//! Exit codes: 0 ok, 1 runtime failure, 2 configuration, 3 policy artifact,
//! 4 input data. Set `PLANTBRIDGE_LOG` (e.g. `info`, `debug`) for logging.

mod commands;
mod config;
mod exit;
mod run_manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use plantbridge::deploy::VelocitySource;

use commands::deploy::{ClockKind, DeployArgs, DeployBackend};
use commands::eval::{EvalArgs, EvalBackend};
use commands::train::{Isolation, TrainArgs};

#[derive(Parser)]
#[command(name = "plantbridge", version, about = "Train and deploy RL controllers for compiled plant models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Velocity {
    /// Filtered backward difference of the measured pitch.
    Estimator,
    /// The backend's own velocity output.
    Backend,
}

impl From<Velocity> for VelocitySource {
    fn from(v: Velocity) -> Self {
        match v {
            Velocity::Estimator => VelocitySource::Estimator,
            Velocity::Backend => VelocitySource::Backend,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that a plant library exports the plant ABI described by a manifest.
    Inspect {
        plant: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Run configuration whose agent sample time the manifest is checked against.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one or more independent PPO runs.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Agent steps per run.
        #[arg(long)]
        steps: Option<usize>,
        /// Number of independent runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Base seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Isolation::InProcess)]
        isolation: Isolation,
    },
    /// Greedy evaluation of a policy over one episode.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        /// Target schedule file; the built-in evaluation sequence when absent.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalBackend::Plant)]
        backend: EvalBackend,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the fixed-rate control loop against a HIL backend.
    Deploy {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_enum)]
        backend: DeployBackend,
        /// Seconds to run.
        #[arg(long)]
        duration: Option<f64>,
        /// Velocity filter cutoff in Hz.
        #[arg(long)]
        cutoff_hz: Option<f64>,
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, value_enum)]
        velocity: Option<Velocity>,
        #[arg(long, value_enum, default_value_t = ClockKind::Realtime)]
        clock: ClockKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Render a training log or trace CSV as an SVG chart.
    Plot {
        csv: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Internal: one training run in a child process.
    #[command(hide = true)]
    TrainRun {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        run: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLANTBRIDGE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Inspect { plant, manifest, config } => commands::inspect::run(&plant, &manifest, config.as_deref()),
        Cmd::Train { config, out, steps, runs, seed, isolation } => {
            commands::train::run(TrainArgs { config, out, steps, runs, seed, isolation })
        }
        Cmd::Eval { policy, schedule, out, backend, config } => {
            commands::eval::run(EvalArgs { policy, schedule, out, backend, config })
        }
        Cmd::Deploy { policy, backend, duration, cutoff_hz, schedule, velocity, clock, config, out } => {
            commands::deploy::run(DeployArgs {
                policy,
                backend,
                duration,
                cutoff_hz,
                schedule,
                velocity: velocity.map(Into::into),
                clock,
                config,
                out,
            })
        }
        Cmd::Plot { csv, output } => commands::plot::run(&csv, &output),
        Cmd::TrainRun { config, out, run } => commands::train::run_worker(&config, &out, run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
