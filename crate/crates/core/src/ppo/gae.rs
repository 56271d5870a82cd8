//! Generalized advantage estimation.

use super::PpoError;

/// Advantages and critic targets for one rollout.
///
/// `boundaries[t]` is `Some(v)` when the episode was truncated right after
/// step `t`; `v` is the critic's value of the final observation. Truncation
/// is not termination, so the return is bootstrapped with `v` and the
/// advantage recursion restarts. `bootstrap_value` plays the same role for
/// the step after the end of the rollout.
///
/// ```text
/// δ_t = r_t + γ·V_next − V_t
/// A_t = δ_t + γλ·A_{t+1}     (A_{t+1} := 0 across a boundary)
/// ```
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    boundaries: &[Option<f64>],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    if values.len() != n || boundaries.len() != n {
        return Err(PpoError::LengthMismatch {
            rewards: n,
            values: values.len(),
            boundaries: boundaries.len(),
        });
    }
    let mut advantages = vec![0.0; n];
    let mut next_advantage = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        if let Some(v_final) = boundaries[t] {
            next_value = v_final;
            next_advantage = 0.0;
        }
        let delta = rewards[t] + gamma * next_value - values[t];
        next_advantage = delta + gamma * lambda * next_advantage;
        advantages[t] = next_advantage;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

/// Rescales to mean 0 and (sample, n−1) standard deviation 1; the
/// standard deviation is floored at 1e-8.
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len();
    if n < 2 {
        return;
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt().max(1e-8);
    for a in advantages {
        *a = (*a - mean) / std;
    }
}
