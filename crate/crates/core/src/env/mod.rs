//! The pitch-tracking environment.
//!
//! Wraps any [`Plant`] in reset/step semantics: a scalar action `u` drives the
//! motors with `(u, −u)`, each step runs a fixed number of plant sub-steps,
//! the observation is `(r − θ, ω)` and the reward is `−|r − θ|`.
//!
//! Sign convention: `delta = r − θ` (target minus pitch). The reward does not
//! depend on the sign, but every policy trained here expects this one.

mod schedule;
mod trace;
mod twin;

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant_abi::{InputBlock, Lifecycle, Plant, PlantError};

pub use schedule::{target_at, ScheduleMode, TargetProfile, TargetSchedule};
pub use trace::{fmt_f64, DeployColumns, EpisodeTrace, TraceRow, DEPLOY_EXTRA_HEADER, ENV_TRACE_HEADER};
pub use twin::{dynamics, substep, twin_step, AeroParams, TwinPlant, TwinState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid schedule field `{field}`: {reason}")]
    InvalidSchedule { field: String, reason: String },
    #[error("step called before reset")]
    NotReset,
    #[error("episode already truncated; call reset")]
    EpisodeOver,
    #[error("non-finite action {0}")]
    NonFiniteAction(f64),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Seconds between agent decisions.
    pub agent_sample_time: f64,
    pub substeps_per_action: usize,
    pub episode_steps: usize,
    pub action_low: f64,
    pub action_high: f64,
    pub obs_low: f64,
    pub obs_high: f64,
    pub schedule: TargetSchedule,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            agent_sample_time: 0.1,
            substeps_per_action: 5,
            episode_steps: 800,
            action_low: -24.0,
            action_high: 24.0,
            obs_low: -PI,
            obs_high: PI,
            schedule: TargetSchedule::default(),
        }
    }
}

impl EnvConfig {
    pub fn episode_duration_s(&self) -> f64 {
        self.episode_steps as f64 * self.agent_sample_time
    }

    /// Agent steps per target hold interval.
    pub fn steps_per_hold(&self) -> usize {
        (self.schedule.hold_duration / self.agent_sample_time).round() as usize
    }

    /// Number of distinct hold intervals in one episode.
    pub fn hold_intervals(&self) -> usize {
        self.episode_steps.div_ceil(self.steps_per_hold())
    }

    /// Checks internal consistency and consistency with a plant's sub-step.
    pub fn validate(&self, plant_substep_s: f64) -> Result<(), EnvError> {
        let mismatch = |m: String| Err(EnvError::ConfigMismatch(m));
        if !(self.agent_sample_time.is_finite() && self.agent_sample_time > 0.0) {
            return mismatch(format!("agent_sample_time {} is not positive", self.agent_sample_time));
        }
        if self.substeps_per_action == 0 || self.episode_steps == 0 {
            return mismatch("substeps_per_action and episode_steps must be positive".into());
        }
        let covered = self.substeps_per_action as f64 * plant_substep_s;
        if (covered - self.agent_sample_time).abs() > 1e-12 {
            return mismatch(format!(
                "{} sub-steps of {} s cover {} s, not the {} s agent sample time",
                self.substeps_per_action, plant_substep_s, covered, self.agent_sample_time
            ));
        }
        if !(self.action_low < self.action_high && self.obs_low < self.obs_high) {
            return mismatch("action and observation bounds must satisfy low < high".into());
        }
        self.schedule
            .validate(self.agent_sample_time, (self.obs_low, self.obs_high))
            .map_err(|(field, reason)| EnvError::InvalidSchedule { field, reason })
    }

    /// Sub-steps per action implied by a plant sub-step, if it divides the
    /// agent sample time exactly.
    pub fn substeps_for(&self, plant_substep_s: f64) -> Option<usize> {
        let ratio = self.agent_sample_time / plant_substep_s;
        let n = ratio.round();
        ((ratio - n).abs() < 1e-9 && n >= 1.0).then_some(n as usize)
    }
}

/// What the policy sees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    /// `r − θ`, radians.
    pub delta: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
}

impl Observation {
    pub fn as_array(&self) -> [f64; 2] {
        [self.delta, self.omega]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub pitch: f64,
    /// Unclipped angular velocity.
    pub velocity: f64,
    pub target: f64,
    /// Unclipped `r − θ`.
    pub delta_raw: f64,
    /// The requested action was outside the action box.
    pub action_saturated: bool,
    /// Some observation component was clipped into the observation box.
    pub obs_clipped: bool,
    /// Action actually applied, after clipping.
    pub applied_action: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// Never set: the task has no failure state.
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

pub struct Env<P: Plant> {
    config: EnvConfig,
    plant: P,
    rng: ChaCha8Rng,
    profile: TargetProfile,
    step_index: Option<usize>,
    steps_per_hold: usize,
}

/// Builds an environment around `plant` and initializes the plant.
pub fn make_env<P: Plant>(config: EnvConfig, plant: P) -> Result<Env<P>, EnvError> {
    Env::new(config, plant)
}

impl<P: Plant> Env<P> {
    pub fn new(config: EnvConfig, mut plant: P) -> Result<Self, EnvError> {
        config.validate(plant.substep_size_s())?;
        if plant.lifecycle() == Lifecycle::Initialized {
            return Err(PlantError::WrongLifecycleState {
                op: "make_env",
                state: Lifecycle::Initialized,
            }
            .into());
        }
        plant.initialize()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.schedule.seed().unwrap_or(0));
        let steps_per_hold = config.steps_per_hold();
        let profile = config.schedule.realize(&mut rng, config.hold_intervals());
        Ok(Self {
            config,
            plant,
            rng,
            profile,
            step_index: None,
            steps_per_hold,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn plant(&self) -> &P {
        &self.plant
    }

    pub fn into_plant(self) -> P {
        self.plant
    }

    /// Realized targets of the current episode.
    pub fn profile(&self) -> &TargetProfile {
        &self.profile
    }

    pub fn action_bounds(&self) -> (f64, f64) {
        (self.config.action_low, self.config.action_high)
    }

    pub fn observation_bounds(&self) -> ([f64; 2], [f64; 2]) {
        let c = &self.config;
        ([c.obs_low; 2], [c.obs_high; 2])
    }

    /// Agent steps taken in the current episode, or `None` before the first reset.
    pub fn step_index(&self) -> Option<usize> {
        self.step_index
    }

    /// Target in force after `step` agent steps.
    pub fn target_for_step(&self, step: usize) -> f64 {
        let idx = (step / self.steps_per_hold).min(self.profile.values.len() - 1);
        self.profile.values[idx]
    }

    /// Restarts the plant and draws the episode's targets.
    ///
    /// With `seed`, the target stream restarts from that seed; without, a
    /// random schedule continues its stream so consecutive episodes differ.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<(Observation, StepInfo), EnvError> {
        if self.plant.lifecycle() == Lifecycle::Initialized {
            self.plant.terminate()?;
        }
        self.plant.initialize()?;
        self.plant.write_inputs(InputBlock::default())?;
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        self.profile = self
            .config
            .schedule
            .realize(&mut self.rng, self.config.hold_intervals());
        self.step_index = Some(0);
        let (observation, info) = self.observe(0.0, false)?;
        Ok((observation, info))
    }

    /// Applies `action` for one agent period.
    pub fn step(&mut self, action: f64) -> Result<StepResult, EnvError> {
        let k = self.step_index.ok_or(EnvError::NotReset)?;
        if k >= self.config.episode_steps {
            return Err(EnvError::EpisodeOver);
        }
        if !action.is_finite() {
            return Err(EnvError::NonFiniteAction(action));
        }
        let u = action.clamp(self.config.action_low, self.config.action_high);
        self.plant.write_inputs(InputBlock::differential(u))?;
        for _ in 0..self.config.substeps_per_action {
            self.plant.step()?;
        }
        let k = k + 1;
        self.step_index = Some(k);
        let (observation, info) = self.observe(u, u != action)?;
        Ok(StepResult {
            observation,
            reward: -info.delta_raw.abs(),
            terminated: false,
            truncated: k == self.config.episode_steps,
            info,
        })
    }

    fn observe(&self, applied: f64, saturated: bool) -> Result<(Observation, StepInfo), EnvError> {
        let out = self.plant.read_outputs()?;
        let target = self.target_for_step(self.step_index.unwrap_or(0));
        let delta_raw = target - out.pitch;
        let (lo, hi) = (self.config.obs_low, self.config.obs_high);
        let observation = Observation {
            delta: delta_raw.clamp(lo, hi),
            omega: out.velocity.clamp(lo, hi),
        };
        let obs_clipped = observation.delta != delta_raw || observation.omega != out.velocity;
        Ok((
            observation,
            StepInfo {
                pitch: out.pitch,
                velocity: out.velocity,
                target,
                delta_raw,
                action_saturated: saturated,
                obs_clipped,
                applied_action: applied,
            },
        ))
    }
}

impl<P: Plant> std::fmt::Debug for Env<P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Env")
            .field("config", &self.config)
            .field("step_index", &self.step_index)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_env(values: Vec<f64>) -> Env<TwinPlant> {
        let config = EnvConfig {
            schedule: TargetSchedule::fixed(10.0, values),
            ..Default::default()
        };
        make_env(config, TwinPlant::default()).unwrap()
    }

    #[test]
    fn protocol_arithmetic() {
        let c = EnvConfig::default();
        assert_eq!(c.episode_steps, 800);
        assert!((c.episode_duration_s() - 80.0).abs() < 1e-9);
        assert_eq!(c.steps_per_hold(), 100);
        assert_eq!(c.hold_intervals(), 8);
    }

    #[test]
    fn spaces() {
        let env = fixed_env(vec![0.0]);
        assert_eq!(env.action_bounds(), (-24.0, 24.0));
        assert_eq!(env.observation_bounds(), ([-PI, -PI], [PI, PI]));
    }

    #[test]
    fn substep_mismatch_rejected() {
        let plant = TwinPlant::new(AeroParams { substep_s: 0.03, ..Default::default() });
        let err = make_env(EnvConfig::default(), plant).unwrap_err();
        assert!(matches!(err, EnvError::ConfigMismatch(_)), "{err}");
    }

    #[test]
    fn reset_observation() {
        let mut env = fixed_env(vec![0.3, -0.1]);
        let (obs, info) = env.reset(None).unwrap();
        assert_eq!(obs, Observation { delta: 0.3, omega: 0.0 });
        assert_eq!(info.target, 0.3);
    }

    #[test]
    fn step_requires_reset() {
        let mut env = fixed_env(vec![0.0]);
        assert_eq!(env.step(0.0).unwrap_err(), EnvError::NotReset);
    }

    #[test]
    fn rest_at_zero_target() {
        let mut env = fixed_env(vec![0.0]);
        assert_eq!(env.reset(None).unwrap().0, Observation::default());
        let r = env.step(0.0).unwrap();
        assert_eq!(r.observation, Observation::default());
        assert_eq!(r.reward, 0.0);
        assert!(!r.terminated && !r.truncated);
    }

    #[test]
    fn truncates_at_episode_end() {
        let mut env = fixed_env(vec![0.1]);
        env.reset(None).unwrap();
        for k in 1..=800 {
            let r = env.step(0.5).unwrap();
            assert!(!r.terminated);
            assert_eq!(r.truncated, k == 800);
            assert_eq!(r.reward, -r.info.delta_raw.abs());
        }
        assert_eq!(env.step(0.0).unwrap_err(), EnvError::EpisodeOver);
        // 800 steps × 5 sub-steps, counted exactly.
        assert_eq!(env.plant().substeps(), 4000);
        assert!((env.plant().time_s() - 80.0).abs() < 1e-9);
    }

    #[test]
    fn action_clipping() {
        let mut a = fixed_env(vec![0.2]);
        let mut b = fixed_env(vec![0.2]);
        a.reset(None).unwrap();
        b.reset(None).unwrap();
        let ra = a.step(100.0).unwrap();
        let rb = b.step(24.0).unwrap();
        assert_eq!(ra.observation, rb.observation);
        assert!(ra.info.action_saturated);
        assert!(!rb.info.action_saturated);
        assert_eq!(ra.info.applied_action, 24.0);
        assert!(a.step(f64::NAN).is_err());
    }

    #[test]
    fn observation_clipping_flagged() {
        let mut env = fixed_env(vec![0.0]);
        env.reset(None).unwrap();
        let mut saw_clip = false;
        for _ in 0..100 {
            let r = env.step(24.0).unwrap();
            assert!(r.observation.delta.abs() <= PI && r.observation.omega.abs() <= PI);
            if r.info.delta_raw.abs() > PI {
                assert!(r.info.obs_clipped);
                assert!(r.reward < -PI);
                saw_clip = true;
            }
        }
        assert!(saw_clip);
    }

    #[test]
    fn seeded_targets_repeat() {
        let config = EnvConfig::default();
        let mut env = make_env(config, TwinPlant::default()).unwrap();
        env.reset(Some(11)).unwrap();
        let first = env.profile().clone();
        env.reset(None).unwrap();
        assert_ne!(env.profile(), &first);
        env.reset(Some(11)).unwrap();
        assert_eq!(env.profile(), &first);
        assert_eq!(first.values.len(), 8);
    }

    #[test]
    fn target_changes_on_hold_boundary() {
        let mut env = fixed_env(vec![0.1, -0.2]);
        env.reset(None).unwrap();
        for k in 1..=100 {
            let r = env.step(0.0).unwrap();
            let expected = if k < 100 { 0.1 } else { -0.2 };
            assert_eq!(r.info.target, expected, "step {k}");
        }
    }
}
