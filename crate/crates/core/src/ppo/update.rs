//! Clipped-surrogate PPO update with an Adam optimizer.

use rand::seq::SliceRandom;
use rand::Rng;

use super::gae::{compute_gae, normalize_advantages};
use super::policy::{gaussian_log_prob, PolicyParams};
use super::{PpoError, PpoHyper};
use crate::env::Observation;

/// On-policy rollout storage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Observation>,
    /// Raw (pre-clip) Gaussian samples.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// `Some(V(final obs))` where an episode was truncated after this step.
    pub boundaries: Vec<Option<f64>>,
    /// Critic value of the observation following the last stored step.
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            observations: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            boundaries: Vec::with_capacity(n),
            bootstrap_value: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: Observation, action: f64, log_prob: f64, reward: f64, value: f64) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.boundaries.push(None);
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.boundaries.clear();
        self.bootstrap_value = 0.0;
    }

    pub fn check(&self) -> Result<(), PpoError> {
        let n = self.len();
        let lens = [
            self.observations.len(),
            self.actions.len(),
            self.log_probs.len(),
            self.values.len(),
            self.boundaries.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(PpoError::LengthMismatch {
                rewards: n,
                values: self.values.len(),
                boundaries: self.boundaries.len(),
            });
        }
        if self.log_probs.iter().any(|l| !l.is_finite()) {
            return Err(PpoError::NonFiniteLoss("non-finite stored log-prob".into()));
        }
        Ok(())
    }

    pub fn advantages(&self, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
        compute_gae(&self.rewards, &self.values, self.bootstrap_value, &self.boundaries, gamma, lambda)
    }
}

/// Loss terms, averaged over a minibatch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Losses {
    /// `−mean(min(ρA, clip(ρ, 1−ε, 1+ε)A))`.
    pub policy: f64,
    /// `mean((V − R)²)`.
    pub value: f64,
    /// Entropy of the action distribution (not the entropy loss).
    pub entropy: f64,
    /// `policy − c_ent·entropy + c_v·value`.
    pub total: f64,
    /// Fraction of samples whose ratio fell outside the clip range.
    pub clip_fraction: f64,
}

/// Evaluates the PPO loss on `indices`, accumulating its gradient with
/// respect to [`PolicyParams::to_flat`] into `grad` when given.
#[allow(clippy::too_many_arguments)]
pub fn ppo_loss(
    params: &PolicyParams,
    traj: &Trajectory,
    advantages: &[f64],
    returns: &[f64],
    indices: &[usize],
    hyper: &PpoHyper,
    mut grad: Option<&mut [f64]>,
) -> Losses {
    let n = indices.len() as f64;
    let na = params.actor.num_params();
    let nc = params.critic.num_params();
    let log_std = params.log_std;
    let var = (2.0 * log_std).exp();
    let (lo, hi) = (1.0 - hyper.clip_range, 1.0 + hyper.clip_range);

    let mut losses = Losses::default();
    let mut clipped = 0usize;
    let mut g_log_std = 0.0;

    for &i in indices {
        let x = traj.observations[i].as_array();
        let actor_acts = params.actor.forward_cached(&x);
        let critic_acts = params.critic.forward_cached(&x);
        let mean = actor_acts.output()[0];
        let value = critic_acts.output()[0];

        let a = traj.actions[i];
        let adv = advantages[i];
        let ratio = (gaussian_log_prob(a, mean, log_std) - traj.log_probs[i]).exp();
        let unclipped = ratio * adv;
        let clipped_obj = ratio.clamp(lo, hi) * adv;
        losses.policy -= unclipped.min(clipped_obj) / n;
        if ratio < lo || ratio > hi {
            clipped += 1;
        }
        let err = value - returns[i];
        losses.value += err * err / n;

        if let Some(g) = grad.as_deref_mut() {
            // d(min)/dρ is A on the unclipped branch, 0 where the clip is active.
            let d_ratio = if unclipped <= clipped_obj { -adv / n } else { 0.0 };
            if d_ratio != 0.0 {
                let diff = a - mean;
                let d_mean = d_ratio * ratio * diff / var;
                g_log_std += d_ratio * ratio * (diff * diff / var - 1.0);
                params.actor.backward(&actor_acts, &[d_mean], &mut g[..na]);
            }
            let d_value = hyper.value_coef * 2.0 * err / n;
            params.critic.backward(&critic_acts, &[d_value], &mut g[na..na + nc]);
        }
    }

    losses.entropy = params.entropy();
    losses.total = losses.policy - hyper.entropy_coef * losses.entropy + hyper.value_coef * losses.value;
    losses.clip_fraction = clipped as f64 / n;
    if let Some(g) = grad {
        g[na + nc] += g_log_std - hyper.entropy_coef;
    }
    losses
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scales `grad` so its L2 norm is at most `max_norm`; returns the norm before.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-6);
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

/// Summary of one PPO update, averaged over all minibatch steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub losses: Losses,
    pub minibatches: usize,
    pub mean_grad_norm: f64,
}

/// Runs `epochs_per_update` passes of shuffled minibatches over `traj`.
///
/// Advantages are normalized once over the whole rollout.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    adam: &mut Adam,
    traj: &Trajectory,
    hyper: &PpoHyper,
    rng: &mut R,
) -> Result<UpdateStats, PpoError> {
    traj.check()?;
    let n = traj.len();
    if n == 0 {
        return Ok(UpdateStats::default());
    }
    let (mut advantages, returns) = traj.advantages(hyper.gamma, hyper.gae_lambda)?;
    normalize_advantages(&mut advantages);

    let mut flat = params.to_flat();
    let mut grad = vec![0.0; flat.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();

    for _ in 0..hyper.epochs_per_update {
        order.shuffle(rng);
        for batch in order.chunks(hyper.minibatch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let losses = ppo_loss(params, traj, &advantages, &returns, batch, hyper, Some(&mut grad));
            if !losses.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PpoError::NonFiniteLoss(format!(
                    "policy {} value {} after {} minibatches",
                    losses.policy, losses.value, stats.minibatches
                )));
            }
            stats.mean_grad_norm += clip_grad_norm(&mut grad, hyper.max_grad_norm);
            adam.step(&mut flat, &grad);
            params.set_flat(&flat);
            // set_flat clamps log-std; keep the optimizer's copy in sync.
            *flat.last_mut().expect("non-empty") = params.log_std;

            stats.losses.policy += losses.policy;
            stats.losses.value += losses.value;
            stats.losses.entropy += losses.entropy;
            stats.losses.total += losses.total;
            stats.losses.clip_fraction += losses.clip_fraction;
            stats.minibatches += 1;
        }
    }
    let k = stats.minibatches as f64;
    stats.losses.policy /= k;
    stats.losses.value /= k;
    stats.losses.entropy /= k;
    stats.losses.total /= k;
    stats.losses.clip_fraction /= k;
    stats.mean_grad_norm /= k;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(seed: u64, n: usize) -> (PolicyParams, Trajectory) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = PolicyParams::init(&mut rng);
        params.log_std = -0.3;
        let mut traj = Trajectory::with_capacity(n);
        for _ in 0..n {
            let obs = Observation {
                delta: rng.random_range(-1.0..1.0),
                omega: rng.random_range(-1.0..1.0),
            };
            let s = super::super::sample_action(&params, &obs, (-24.0, 24.0), &mut rng);
            traj.push(obs, s.raw, s.log_prob, -rng.random_range(0.0..1.0), params.value(&obs));
        }
        (params, traj)
    }

    #[test]
    fn ratio_one_policy_loss_is_negative_mean_advantage() {
        let (params, traj) = toy(1, 16);
        let hyper = PpoHyper::default();
        let (adv, ret) = traj.advantages(hyper.gamma, hyper.gae_lambda).unwrap();
        let idx: Vec<usize> = (0..16).collect();
        let l = ppo_loss(&params, &traj, &adv, &ret, &idx, &hyper, None);
        let mean_adv = adv.iter().sum::<f64>() / 16.0;
        assert!((l.policy + mean_adv).abs() < 1e-12);
        assert_eq!(l.clip_fraction, 0.0);
    }

    #[test]
    fn update_is_reproducible() {
        let (params, traj) = toy(2, 128);
        let hyper = PpoHyper { minibatch_size: 32, epochs_per_update: 3, ..Default::default() };
        let run = || {
            let mut p = params.clone();
            let mut adam = Adam::new(p.num_params(), hyper.learning_rate);
            let stats = ppo_update(&mut p, &mut adam, &traj, &hyper, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
            (p.to_bytes(), stats)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(sa.minibatches, 12);
        assert_ne!(a, params.to_bytes());
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn grad_clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g.iter().map(|x| x * x).sum::<f64>().sqrt() - 0.5).abs() < 1e-6);
        let mut small = vec![0.1, 0.1];
        clip_grad_norm(&mut small, 0.5);
        assert_eq!(small, vec![0.1, 0.1]);
    }

    #[test]
    fn rejects_ragged_trajectory() {
        let (mut params, mut traj) = toy(3, 8);
        traj.values.pop();
        let mut adam = Adam::new(params.num_params(), 1e-3);
        let err = ppo_update(&mut params, &mut adam, &traj, &PpoHyper::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(PpoError::LengthMismatch { .. })));
    }
}
