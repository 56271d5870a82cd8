//! Proximal policy optimization for the pitch task: Gaussian actor-critic
//! MLPs, GAE, the clipped surrogate objective and the training/evaluation
//! loops.

mod gae;
mod mlp;
mod policy;
mod train;
mod update;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;

pub use gae::{compute_gae, normalize_advantages};
pub use mlp::{param_count, Activations, Mlp};
pub use policy::{
    gaussian_log_prob, policy_forward, sample_action, ArtifactError, PolicyParams, SampledAction,
    LOG_STD_MAX, LOG_STD_MIN, NET_SIZES, POLICY_FORMAT_VERSION, POLICY_MAGIC,
};
pub use train::{
    evaluate, random_uniform_returns, train, train_with_progress, EpisodeRecord, TrainingLog,
    UpdateRecord,
};
pub use update::{clip_grad_norm, ppo_loss, ppo_update, Adam, Losses, Trajectory, UpdateStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PpoError {
    #[error("array lengths differ: {rewards} rewards, {values} values, {boundaries} boundaries")]
    LengthMismatch {
        rewards: usize,
        values: usize,
        boundaries: usize,
    },
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("invalid hyperparameter `{0}`: {1}")]
    InvalidHyper(&'static str, String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// PPO hyperparameters. Defaults are the widely used reference defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoHyper {
    pub learning_rate: f64,
    pub rollout_horizon: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub total_steps: usize,
    pub n_runs: usize,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            rollout_horizon: 2048,
            minibatch_size: 64,
            epochs_per_update: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            total_steps: 500_000,
            n_runs: 5,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |name, msg: String| Err(PpoError::InvalidHyper(name, msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", format!("{} not in (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", format!("{} not in [0, 1]", self.gae_lambda));
        }
        if !(self.clip_range > 0.0 && self.clip_range.is_finite()) {
            return bad("clip_range", format!("{} is not positive", self.clip_range));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("{} is not positive", self.learning_rate));
        }
        if !(self.max_grad_norm > 0.0 && self.max_grad_norm.is_finite()) {
            return bad("max_grad_norm", format!("{} is not positive", self.max_grad_norm));
        }
        if self.rollout_horizon == 0 || self.minibatch_size == 0 || self.epochs_per_update == 0 {
            return bad("rollout_horizon", "horizon, minibatch and epochs must be positive".into());
        }
        if !self.rollout_horizon.is_multiple_of(self.minibatch_size) {
            return bad(
                "minibatch_size",
                format!("{} does not divide horizon {}", self.minibatch_size, self.rollout_horizon),
            );
        }
        if self.n_runs == 0 {
            return bad("n_runs", "must be positive".into());
        }
        Ok(())
    }

    /// Number of policy updates a run performs; the last rollout may be short.
    pub fn n_updates(&self) -> usize {
        self.total_steps.div_ceil(self.rollout_horizon)
    }
}

/// Converts an episode return of `−Σ|Δ|` into the mean absolute pitch
/// deviation in degrees.
pub fn return_to_mean_deviation_deg(episode_return: f64, steps: usize) -> f64 {
    assert!(steps > 0, "episode must have at least one step");
    episode_return.abs() / steps as f64 * 180.0 / std::f64::consts::PI
}
