use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::ValueEnum;
use plantbridge::deploy::{mock_hil, run_control_loop, Clock, MonotonicClock, VelocitySource, VirtualClock};

use super::{load_policy, summary_line};
use crate::config::{load_schedule, RunConfig};
use crate::exit::{CmdResult, ExitCodeExt, CONFIG};
use crate::run_manifest::RunManifest;

pub const TRACE_FILE: &str = "deploy_trace.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeployBackend {
    /// Simulated plant behind the HIL backend interface.
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ClockKind {
    /// Wall-clock deadlines.
    #[default]
    Realtime,
    /// Simulated time; finishes as fast as the plant can be stepped.
    Virtual,
}

pub struct DeployArgs {
    pub policy: PathBuf,
    pub backend: DeployBackend,
    pub duration: Option<f64>,
    pub cutoff_hz: Option<f64>,
    pub schedule: Option<PathBuf>,
    pub velocity: Option<VelocitySource>,
    pub clock: ClockKind,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn run(args: DeployArgs) -> CmdResult {
    let DeployBackend::Mock = args.backend;
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let policy = load_policy(&args.policy)?;
    if let Some(d) = args.duration {
        cfg.deploy.duration = d;
    }
    if let Some(fc) = args.cutoff_hz {
        cfg.deploy.cutoff_hz = fc;
    }
    if let Some(path) = &args.schedule {
        cfg.deploy.schedule = load_schedule(path)?;
    }
    if let Some(v) = args.velocity {
        cfg.deploy.velocity_source = v;
    }
    cfg.deploy.validate().exit_code(CONFIG)?;

    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).exit_code(CONFIG)?;
    let mut manifest = RunManifest::new("deploy", cfg.clone(), cfg.deploy.schedule.seed().into_iter().collect(), out);
    manifest.artifacts = vec![TRACE_FILE.into()];
    manifest.write_atomic()?;

    let clock: Arc<dyn Clock> = match args.clock {
        ClockKind::Realtime => Arc::new(MonotonicClock::new()),
        ClockKind::Virtual => Arc::new(VirtualClock::new()),
    };
    let mut hil = mock_hil(cfg.plant.open()?, clock.clone())?;
    let trace_path = out.join(TRACE_FILE);
    let mut sink = BufWriter::new(File::create(&trace_path)?);
    println!(
        "deploying for {} s at {} s per tick, cutoff {} Hz",
        cfg.deploy.duration, cfg.deploy.sample_time, cfg.deploy.cutoff_hz
    );
    let report = run_control_loop(&cfg.deploy, &policy, &mut hil, clock.as_ref(), Some(&mut sink))?;

    let mean_period = report.mean_period().map_or(f64::NAN, |p| p.as_secs_f64());
    println!(
        "{} ticks, {} overruns, mean period {:.3} ms",
        report.trace.len(),
        report.overruns,
        mean_period * 1e3
    );
    println!("{}", summary_line(report.trace.total_reward(), report.trace.len()));
    println!("trace {}", trace_path.display());
    Ok(())
}
