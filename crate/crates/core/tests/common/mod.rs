//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use plantbridge::env::{AeroParams, TwinState};
use plantbridge::InputBlock;

/// Prints one result line and hands the verdict back for asserting.
///
/// Writes to the process's stderr handle directly rather than through
/// `println!`, so the line shows up even when the harness captures output.
pub fn report(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) -> bool {
    let line = format!(
        "[{}] criterion {id}: {name} -- {}\n",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    let _ = std::io::Write::write_all(&mut std::io::stderr(), line.as_bytes());
    pass
}

/// GAE by explicit summation: `A_t = Σ_l (γλ)^l δ_{t+l}` over the rest of
/// the episode segment, each `δ` formed from scratch.
pub fn gae_brute_force(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    boundaries: &[Option<f64>],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| -> f64 {
        match boundaries[t] {
            Some(v) => v,
            None if t + 1 == n => bootstrap,
            None => values[t + 1],
        }
    };
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut weight = 1.0;
            let mut s = t;
            loop {
                let delta = rewards[s] + gamma * next_value(s) - values[s];
                total += weight * delta;
                if boundaries[s].is_some() || s + 1 == n {
                    break;
                }
                weight *= gamma * lambda;
                s += 1;
            }
            total
        })
        .collect()
}

/// Reward-to-go `Σ_{s≥t} r_s` within each episode segment.
pub fn reward_to_go(rewards: &[f64], boundaries: &[Option<f64>]) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let mut total = 0.0;
            for s in t..rewards.len() {
                total += rewards[s];
                if boundaries[s].is_some() {
                    break;
                }
            }
            total
        })
        .collect()
}

/// Fine explicit-midpoint integration of the pitch model, independent of the
/// RK4 path under test.
pub fn fine_midpoint(start: TwinState, inputs: InputBlock, p: &AeroParams, horizon: f64, n: usize) -> (f64, f64) {
    let accel = |th: f64, om: f64| {
        (p.torque_gain * (inputs.v0 - inputs.v1) - p.damping * om - p.stiffness * th) / p.inertia
    };
    let dt = horizon / n as f64;
    let (mut th, mut om) = (start.theta, start.omega);
    for _ in 0..n {
        let a1 = accel(th, om);
        let (thm, omm) = (th + 0.5 * dt * om, om + 0.5 * dt * a1);
        let a2 = accel(thm, omm);
        th += dt * omm;
        om += dt * a2;
    }
    (th, om)
}

/// Closed-form solution of the underdamped linear pitch model under a
/// constant input, from `(theta0, omega0)` after `t` seconds.
pub fn analytic_pitch(theta0: f64, omega0: f64, inputs: InputBlock, p: &AeroParams, t: f64) -> (f64, f64) {
    let wn = (p.stiffness / p.inertia).sqrt();
    let zeta = p.damping / (2.0 * (p.stiffness * p.inertia).sqrt());
    assert!(zeta < 1.0, "oracle assumes the underdamped case");
    let wd = wn * (1.0 - zeta * zeta).sqrt();
    let sigma = zeta * wn;
    let x_ss = p.torque_gain * (inputs.v0 - inputs.v1) / p.stiffness;
    let x0 = theta0 - x_ss;
    let c1 = x0;
    let c2 = (omega0 + sigma * x0) / wd;
    let e = (-sigma * t).exp();
    let (s, c) = (wd * t).sin_cos();
    let theta = x_ss + e * (c1 * c + c2 * s);
    let omega = e * ((-sigma) * (c1 * c + c2 * s) + (-c1 * wd * s + c2 * wd * c));
    (theta, omega)
}
