use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::ValueEnum;
use plantbridge::deploy::{mock_hil, run_control_loop, VirtualClock};
use plantbridge::ppo::evaluate;
use plantbridge::{make_env, TargetSchedule};

use super::{load_policy, summary_line};
use crate::config::{load_schedule, validate_schedule, RunConfig};
use crate::exit::{CmdResult, ExitCodeExt, CONFIG};
use crate::run_manifest::RunManifest;

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum EvalBackend {
    /// Step the plant through the training environment.
    #[default]
    Plant,
    /// Run the deployment loop against the mock HIL backend on simulated time.
    Mock,
}

pub struct EvalArgs {
    pub policy: PathBuf,
    pub schedule: Option<PathBuf>,
    pub out: PathBuf,
    pub backend: EvalBackend,
    pub config: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> CmdResult {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let policy = load_policy(&args.policy)?;
    let schedule = match &args.schedule {
        Some(path) => load_schedule(path)?,
        None => TargetSchedule::evaluation_default(),
    };
    validate_schedule(&schedule, &cfg.env)?;
    cfg.env.schedule = schedule.clone();
    cfg.deploy.schedule = schedule;
    cfg.validate_env()?;

    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).exit_code(CONFIG)?;
    let mut manifest = RunManifest::new("eval", cfg.clone(), cfg.env.schedule.seed().into_iter().collect(), out);
    manifest.artifacts = vec![TRACE_FILE.into(), SUMMARY_FILE.into()];
    manifest.write_atomic()?;

    let trace = match args.backend {
        EvalBackend::Plant => {
            let mut env = make_env(cfg.env.clone(), cfg.plant.open()?).exit_code(CONFIG)?;
            evaluate(&policy, &mut env, None)?.0
        }
        EvalBackend::Mock => {
            let clock = Arc::new(VirtualClock::new());
            let mut hil = mock_hil(cfg.plant.open()?, clock.clone())?;
            let mut loop_cfg = cfg.deploy.clone();
            loop_cfg.sample_time = cfg.env.agent_sample_time;
            loop_cfg.duration = cfg.env.episode_duration_s();
            loop_cfg.validate().exit_code(CONFIG)?;
            run_control_loop(&loop_cfg, &policy, &mut hil, clock.as_ref(), None)?.trace
        }
    };
    write_outputs(out, &trace.to_csv_string(), &summary_line(trace.total_reward(), trace.len()))
}

fn write_outputs(out: &Path, trace_csv: &str, summary: &str) -> CmdResult {
    fs::write(out.join(TRACE_FILE), trace_csv)?;
    fs::write(out.join(SUMMARY_FILE), format!("{summary}\n"))?;
    println!("{summary}");
    println!("trace {}", out.join(TRACE_FILE).display());
    Ok(())
}
