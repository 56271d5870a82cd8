use std::time::Instant;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::policy::{sample_action, PolicyParams};
use super::update::{ppo_update, Adam, Trajectory};
use super::{PpoError, PpoHyper};
use crate::env::{Env, EpisodeTrace, TraceRow};
use crate::plant_abi::Plant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based episode number within the run.
    pub episode: usize,
    pub episode_return: f64,
    pub steps: usize,
    /// Wall-clock seconds since the run started, at episode end.
    pub wall_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    /// 1-based update number within the run.
    pub update: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateRecord>,
    pub total_steps: usize,
    pub wall_s: f64,
}

impl TrainingLog {
    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.episode_return).collect()
    }

    /// SHA-256 over everything except wall-clock fields, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((self.total_steps as u64).to_le_bytes());
        for e in &self.episodes {
            h.update((e.episode as u64).to_le_bytes());
            h.update(e.episode_return.to_bits().to_le_bytes());
            h.update((e.steps as u64).to_le_bytes());
        }
        for u in &self.updates {
            h.update((u.update as u64).to_le_bytes());
            for v in [u.policy_loss, u.value_loss, u.entropy] {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Trains a fresh policy on `env` for `hyper.total_steps` agent steps.
pub fn train<P: Plant>(
    env: &mut Env<P>,
    hyper: &PpoHyper,
    seed: u64,
) -> Result<(PolicyParams, TrainingLog), PpoError> {
    train_with_progress(env, hyper, seed, |_, _| {})
}

/// [`train`] with a callback after every update.
pub fn train_with_progress<P: Plant, F>(
    env: &mut Env<P>,
    hyper: &PpoHyper,
    seed: u64,
    mut on_update: F,
) -> Result<(PolicyParams, TrainingLog), PpoError>
where
    F: FnMut(&UpdateRecord, &TrainingLog),
{
    hyper.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = PolicyParams::init(&mut rng);
    let mut adam = Adam::new(params.num_params(), hyper.learning_rate);
    let bounds = env.action_bounds();

    let mut log = TrainingLog {
        seed,
        ..Default::default()
    };
    let mut traj = Trajectory::with_capacity(hyper.rollout_horizon);
    let (mut obs, _) = env.reset(Some(seed))?;
    let mut episode_return = 0.0;
    let mut episode_steps = 0;

    for update in 1..=hyper.n_updates() {
        let horizon = hyper.rollout_horizon.min(hyper.total_steps - log.total_steps);
        traj.clear();
        for _ in 0..horizon {
            let value = params.value(&obs);
            let action = sample_action(&params, &obs, bounds, &mut rng);
            let step = env.step(action.clipped)?;
            traj.push(obs, action.raw, action.log_prob, step.reward, value);
            episode_return += step.reward;
            episode_steps += 1;
            log.total_steps += 1;

            if step.truncated || step.terminated {
                let final_value = if step.terminated { 0.0 } else { params.value(&step.observation) };
                *traj.boundaries.last_mut().expect("just pushed") = Some(final_value);
                log.episodes.push(EpisodeRecord {
                    episode: log.episodes.len() + 1,
                    episode_return,
                    steps: episode_steps,
                    wall_s: started.elapsed().as_secs_f64(),
                });
                debug!("episode {} return {episode_return:.3}", log.episodes.len());
                episode_return = 0.0;
                episode_steps = 0;
                obs = env.reset(None)?.0;
            } else {
                obs = step.observation;
            }
        }
        traj.bootstrap_value = params.value(&obs);

        let stats = ppo_update(&mut params, &mut adam, &traj, hyper, &mut rng)?;
        let record = UpdateRecord {
            update,
            policy_loss: stats.losses.policy,
            value_loss: stats.losses.value,
            entropy: stats.losses.entropy,
        };
        log.updates.push(record);
        if let Some(last) = log.episodes.last() {
            info!(
                "seed {seed} update {update}/{} steps {} last return {:.2} value loss {:.4}",
                hyper.n_updates(),
                log.total_steps,
                last.episode_return,
                record.value_loss
            );
        }
        on_update(&record, &log);
    }
    log.wall_s = started.elapsed().as_secs_f64();
    Ok((params, log))
}

/// Runs one greedy episode (action = clipped mean) and returns its trace
/// and return. Each trace row is stamped with the time the pitch was measured.
pub fn evaluate<P: Plant>(
    params: &PolicyParams,
    env: &mut Env<P>,
    seed: Option<u64>,
) -> Result<(EpisodeTrace, f64), PpoError> {
    let bounds = env.action_bounds();
    let dt = env.config().agent_sample_time;
    let (mut obs, _) = env.reset(seed)?;
    let mut trace = EpisodeTrace::default();
    let mut total = 0.0;
    for k in 1.. {
        let action = params.greedy_action(&obs, bounds);
        let step = env.step(action)?;
        total += step.reward;
        trace.rows.push(TraceRow {
            t_s: k as f64 * dt,
            target_rad: step.info.target,
            pitch_rad: step.info.pitch,
            omega_rad_s: step.info.velocity,
            action_v: step.info.applied_action,
            reward: step.reward,
        });
        if step.truncated || step.terminated {
            break;
        }
        obs = step.observation;
    }
    Ok((trace, total))
}

/// Returns of `episodes` episodes under actions drawn uniformly from the
/// action box. The first reset uses `seed`.
pub fn random_uniform_returns<P: Plant>(
    env: &mut Env<P>,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>, PpoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = env.action_bounds();
    let mut returns = Vec::with_capacity(episodes);
    for e in 0..episodes {
        env.reset(if e == 0 { Some(seed) } else { None })?;
        let mut total = 0.0;
        loop {
            let step = env.step(rng.random_range(lo..=hi))?;
            total += step.reward;
            if step.truncated || step.terminated {
                break;
            }
        }
        returns.push(total);
    }
    Ok(returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, EnvConfig, TargetSchedule, TwinPlant};

    fn small_env(episode_steps: usize) -> Env<TwinPlant> {
        let config = EnvConfig {
            episode_steps,
            schedule: TargetSchedule { hold_duration: 1.0, ..Default::default() },
            ..Default::default()
        };
        make_env(config, TwinPlant::default()).unwrap()
    }

    #[test]
    fn update_and_episode_counts() {
        let mut env = small_env(800);
        let hyper = PpoHyper { total_steps: 4096, epochs_per_update: 1, ..Default::default() };
        let (_, log) = train(&mut env, &hyper, 3).unwrap();
        assert_eq!(log.updates.len(), 2);
        assert_eq!(log.episodes.len(), 5);
        assert_eq!(log.total_steps, 4096);
        assert!(log.episodes.iter().all(|e| e.steps == 800 && e.episode_return <= 0.0));
    }

    #[test]
    fn partial_last_rollout() {
        let mut env = small_env(50);
        let hyper = PpoHyper {
            total_steps: 300,
            rollout_horizon: 128,
            minibatch_size: 32,
            epochs_per_update: 1,
            ..Default::default()
        };
        let (_, log) = train(&mut env, &hyper, 1).unwrap();
        assert_eq!(log.updates.len(), 3);
        assert_eq!(log.total_steps, 300);
        assert_eq!(log.episodes.len(), 6);
    }

    #[test]
    fn zero_policy_rests_at_zero_target() {
        let config = EnvConfig {
            schedule: TargetSchedule::fixed(10.0, vec![0.0]),
            ..Default::default()
        };
        let mut env = make_env(config, TwinPlant::default()).unwrap();
        let (trace, ret) = evaluate(&PolicyParams::zeros(), &mut env, None).unwrap();
        assert_eq!(ret, 0.0);
        assert_eq!(trace.len(), 800);
        assert!((trace.rows[799].t_s - 80.0).abs() < 1e-9);
    }

    #[test]
    fn greedy_evaluation_is_deterministic() {
        let params = PolicyParams::linear_feedback(1.0, -0.5);
        let mut env = small_env(200);
        let (a, ra) = evaluate(&params, &mut env, Some(4)).unwrap();
        let (b, rb) = evaluate(&params, &mut env, Some(4)).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert_eq!(ra.to_bits(), rb.to_bits());
        assert!((-200.0 * 2.0 * std::f64::consts::PI..0.0).contains(&ra));
    }
}
