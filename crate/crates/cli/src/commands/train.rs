use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context};
use clap::ValueEnum;
use log::info;
use plantbridge::env::fmt_f64;
use plantbridge::ppo::train_with_progress;
use plantbridge::{make_env, return_to_mean_deviation_deg};

use crate::config::RunConfig;
use crate::exit::{fail, CmdResult, ExitCodeExt, CONFIG, DATA};
use crate::run_manifest::RunManifest;

pub const EPISODES_HEADER: &str = "run,episode,return,steps,wall_s";
pub const UPDATES_HEADER: &str = "run,update,policy_loss,value_loss,entropy";
pub const AGGREGATE_HEADER: &str = "episode,mean_return,min_return,max_return,runs";
pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// How independent runs are executed. Runs never share a process image
/// concurrently either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Isolation {
    /// One after another inside this process.
    #[default]
    InProcess,
    /// One child process per run, started sequentially.
    Process,
}

pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub steps: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub isolation: Isolation,
}

fn run_dir(out: &Path, run: usize) -> PathBuf {
    out.join(format!("run-{run}"))
}

fn run_artifacts(run: usize) -> [PathBuf; 3] {
    let dir = PathBuf::from(format!("run-{run}"));
    ["policy.bin", "episodes.csv", "updates.csv"].map(|f| dir.join(f))
}

pub fn run(args: TrainArgs) -> CmdResult {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(steps) = args.steps {
        cfg.ppo.total_steps = steps;
    }
    if let Some(runs) = args.runs {
        cfg.ppo.n_runs = runs;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate_env()?;

    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).exit_code(CONFIG)?;
    let snapshot = out.join(CONFIG_SNAPSHOT);
    fs::write(&snapshot, cfg.to_toml())?;

    let seeds: Vec<u64> = (0..cfg.ppo.n_runs).map(|i| cfg.seed + i as u64).collect();
    let mut manifest = RunManifest::new("train", cfg.clone(), seeds.clone(), out);
    manifest.artifacts.push(CONFIG_SNAPSHOT.into());
    for run in 0..cfg.ppo.n_runs {
        manifest.artifacts.extend(run_artifacts(run));
    }
    manifest.artifacts.push(AGGREGATE_FILE.into());
    manifest.write_atomic()?;

    for (run, seed) in seeds.iter().enumerate() {
        println!("run {run}: seed {seed}, {} steps", cfg.ppo.total_steps);
        match args.isolation {
            Isolation::InProcess => train_one(&cfg, run, out)?,
            Isolation::Process => spawn_run(&snapshot, run, out)?,
        }
    }

    let aggregate = aggregate_runs(out, cfg.ppo.n_runs)?;
    fs::write(out.join(AGGREGATE_FILE), &aggregate)?;
    let missing = manifest.missing_artifacts();
    if !missing.is_empty() {
        return fail(DATA, format!("run finished without producing {missing:?}"));
    }
    println!("aggregate {}", out.join(AGGREGATE_FILE).display());
    Ok(())
}

/// Trains run `run` of `cfg` and writes its artifacts under `out/run-<run>`.
pub fn train_one(cfg: &RunConfig, run: usize, out: &Path) -> CmdResult {
    let seed = cfg.seed + run as u64;
    let plant = cfg.plant.open()?;
    let mut env = make_env(cfg.env.clone(), plant).exit_code(CONFIG)?;
    let total_updates = cfg.ppo.n_updates();
    let (policy, log) = train_with_progress(&mut env, &cfg.ppo, seed, |u, log| {
        if let Some(last) = log.episodes.last() {
            info!("run {run} update {}/{total_updates}: episode {} return {:.2}", u.update, last.episode, last.episode_return);
        }
    })?;

    let dir = run_dir(out, run);
    fs::create_dir_all(&dir)?;
    let [policy_path, episodes_path, updates_path] = run_artifacts(run).map(|p| out.join(p));
    policy.save(&policy_path)?;

    // Everything except the wall-clock column is reproducible byte for byte.
    let mut episodes = format!("{EPISODES_HEADER}\n");
    for e in &log.episodes {
        episodes.push_str(&format!("{run},{},{},{},{:.6}\n", e.episode, fmt_f64(e.episode_return), e.steps, e.wall_s));
    }
    let mut updates = format!("{UPDATES_HEADER}\n");
    for u in &log.updates {
        updates.push_str(&format!(
            "{run},{},{},{},{}\n",
            u.update,
            fmt_f64(u.policy_loss),
            fmt_f64(u.value_loss),
            fmt_f64(u.entropy)
        ));
    }
    fs::write(episodes_path, episodes)?;
    fs::write(updates_path, updates)?;

    let returns = log.returns();
    let tail = &returns[returns.len().saturating_sub(10)..];
    if !tail.is_empty() {
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let steps = cfg.env.episode_steps;
        println!(
            "run {run}: {} episodes, last-{} mean return {mean:.2} (mean deviation {:.2} deg), {:.1} s",
            returns.len(),
            tail.len(),
            return_to_mean_deviation_deg(mean, steps),
            log.wall_s
        );
    }
    Ok(())
}

fn spawn_run(snapshot: &Path, run: usize, out: &Path) -> CmdResult {
    let exe = std::env::current_exe().context("locating own executable")?;
    let status = Command::new(exe)
        .arg("train-run")
        .arg("--config")
        .arg(snapshot)
        .arg("--out")
        .arg(out)
        .arg("--run")
        .arg(run.to_string())
        .status()
        .context("starting run process")?;
    match status.code() {
        Some(0) => Ok(()),
        Some(code) => Err(crate::exit::Failure {
            code: u8::try_from(code).unwrap_or(1),
            error: anyhow::anyhow!("run {run} exited with status {code}"),
        }),
        None => fail(1, format!("run {run} was killed by a signal")),
    }
}

/// Per-episode mean/min/max of the return across runs, truncated to the
/// shortest run.
pub fn aggregate_runs(out: &Path, runs: usize) -> anyhow::Result<String> {
    let mut per_run = Vec::with_capacity(runs);
    for run in 0..runs {
        let path = run_dir(out, run).join("episodes.csv");
        let mut reader = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut returns = Vec::new();
        for record in reader.records() {
            let record = record?;
            let ret: f64 = record.get(2).context("missing return column")?.parse()?;
            returns.push(ret);
        }
        per_run.push(returns);
    }
    let Some(episodes) = per_run.iter().map(Vec::len).min() else {
        bail!("no runs to aggregate");
    };
    let mut text = format!("{AGGREGATE_HEADER}\n");
    for e in 0..episodes {
        let values: Vec<f64> = per_run.iter().map(|r| r[e]).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        text.push_str(&format!("{},{},{},{},{}\n", e + 1, fmt_f64(mean), fmt_f64(min), fmt_f64(max), values.len()));
    }
    Ok(text)
}

/// Entry point of a child run process.
pub fn run_worker(config: &Path, out: &Path, run: usize) -> CmdResult {
    let cfg = RunConfig::load(config)?;
    train_one(&cfg, run, out)
}
