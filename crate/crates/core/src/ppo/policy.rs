use std::io::{self, Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::mlp::{param_count, Mlp};
use crate::env::Observation;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Layer sizes of both networks: 2 observations, two hidden layers of 64.
pub const NET_SIZES: [usize; 4] = [2, 64, 64, 1];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Actor-critic weights plus the state-independent action log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// Outputs the action mean in volts.
    pub actor: Mlp,
    /// Outputs the state-value estimate.
    pub critic: Mlp,
    pub log_std: f64,
}

/// A stochastic action: the raw Gaussian draw and its clipped version.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub raw: f64,
    pub clipped: f64,
    /// Log-density of `raw`.
    pub log_prob: f64,
}

impl PolicyParams {
    /// Fresh networks: orthogonal init with gains √2 on hidden layers, 0.01 on
    /// the action head and 1 on the value head; log-std 0.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let s2 = std::f64::consts::SQRT_2;
        Self {
            actor: Mlp::orthogonal(&NET_SIZES, &[s2, s2, 0.01], rng),
            critic: Mlp::orthogonal(&NET_SIZES, &[s2, s2, 1.0], rng),
            log_std: 0.0,
        }
    }

    pub fn zeros() -> Self {
        Self {
            actor: Mlp::zeros(&NET_SIZES),
            critic: Mlp::zeros(&NET_SIZES),
            log_std: 0.0,
        }
    }

    /// A network whose mean is, to within ~1e-12 relative, the linear
    /// feedback `kp·delta + kd·omega` for observations of order one.
    ///
    /// Handy as a known, non-trivial greedy controller.
    pub fn linear_feedback(kp: f64, kd: f64) -> Self {
        const EPS: f64 = 1e-6;
        let mut p = Self::zeros();
        {
            let (w, _) = p.actor.layer_mut(0);
            w[0] = EPS * kp;
            w[1] = EPS * kd;
        }
        p.actor.layer_mut(1).0[0] = 1.0;
        // tanh(tanh(εz)) = εz − (2/3)(εz)³ + …; fold the 1/ε back in.
        p.actor.layer_mut(2).0[0] = 1.0 / EPS;
        p
    }

    pub fn num_params(&self) -> usize {
        self.actor.num_params() + self.critic.num_params() + 1
    }

    /// Actor params, then critic params, then log-std.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.actor.params());
        v.extend_from_slice(self.critic.params());
        v.push(self.log_std);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let na = self.actor.num_params();
        let nc = self.critic.num_params();
        self.actor.params_mut().copy_from_slice(&flat[..na]);
        self.critic.params_mut().copy_from_slice(&flat[na..na + nc]);
        self.log_std = flat[na + nc].clamp(LOG_STD_MIN, LOG_STD_MAX);
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    pub fn action_mean(&self, obs: &Observation) -> f64 {
        self.actor.forward(&obs.as_array())[0]
    }

    pub fn value(&self, obs: &Observation) -> f64 {
        self.critic.forward(&obs.as_array())[0]
    }

    /// Deterministic action: the clipped mean.
    pub fn greedy_action(&self, obs: &Observation, bounds: (f64, f64)) -> f64 {
        self.action_mean(obs).clamp(bounds.0, bounds.1)
    }

    pub fn std(&self) -> f64 {
        self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX).exp()
    }

    /// Differential entropy of the Gaussian head.
    pub fn entropy(&self) -> f64 {
        0.5 + LN_SQRT_2PI + self.log_std
    }
}

/// `(action mean, value)` for one observation.
pub fn policy_forward(params: &PolicyParams, obs: &Observation) -> (f64, f64) {
    (params.action_mean(obs), params.value(obs))
}

/// Log-density of `x` under `Normal(mean, exp(log_std))`.
pub fn gaussian_log_prob(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) / log_std.exp();
    -0.5 * z * z - log_std - LN_SQRT_2PI
}

/// Samples `Normal(mean, std)`, clips into `bounds`; the log-prob is of the
/// unclipped draw.
pub fn sample_action<R: Rng + ?Sized>(
    params: &PolicyParams,
    obs: &Observation,
    bounds: (f64, f64),
    rng: &mut R,
) -> SampledAction {
    let mean = params.action_mean(obs);
    let log_std = params.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
    let noise: f64 = rng.sample(StandardNormal);
    let raw = mean + log_std.exp() * noise;
    SampledAction {
        raw,
        clipped: raw.clamp(bounds.0, bounds.1),
        log_prob: gaussian_log_prob(raw, mean, log_std),
    }
}

// ---------------------------------------------------------------------------
// Policy artifact
//
// Layout, all little-endian:
//   magic      8 bytes  "PBPOLICY"
//   version    u32      = 1
//   n_actor    u32      number of actor layer sizes, then n_actor × u32 sizes
//   n_critic   u32      number of critic layer sizes, then n_critic × u32 sizes
//   actor      f64 × param_count(actor sizes)
//   critic     f64 × param_count(critic sizes)
//   log_std    f64
// Within each network: per layer, weights row-major [out][in], then bias.

pub const POLICY_MAGIC: &[u8; 8] = b"PBPOLICY";
pub const POLICY_FORMAT_VERSION: u32 = 1;
const MAX_LAYERS: u32 = 16;
const MAX_WIDTH: u32 = 1 << 16;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a policy file (bad magic)")]
    BadMagic,
    #[error("unsupported policy format version {0}")]
    UnsupportedVersion(u32),
    #[error("policy file is truncated")]
    Truncated,
    #[error("policy file has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid layer layout: {0}")]
    InvalidLayout(String),
    #[error("policy contains non-finite parameters")]
    NonFinite,
}

impl PolicyParams {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), ArtifactError> {
        out.write_all(POLICY_MAGIC)?;
        out.write_all(&POLICY_FORMAT_VERSION.to_le_bytes())?;
        for net in [&self.actor, &self.critic] {
            out.write_all(&(net.sizes().len() as u32).to_le_bytes())?;
            for &s in net.sizes() {
                out.write_all(&(s as u32).to_le_bytes())?;
            }
        }
        for v in self.to_flat() {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != POLICY_MAGIC {
            return Err(ArtifactError::BadMagic);
        }
        let version = cur.u32()?;
        if version != POLICY_FORMAT_VERSION {
            return Err(ArtifactError::UnsupportedVersion(version));
        }
        let actor_sizes = cur.sizes("actor")?;
        let critic_sizes = cur.sizes("critic")?;
        for (name, sizes) in [("actor", &actor_sizes), ("critic", &critic_sizes)] {
            if sizes[0] != 2 || sizes[sizes.len() - 1] != 1 {
                return Err(ArtifactError::InvalidLayout(format!(
                    "{name} must map 2 inputs to 1 output, got {sizes:?}"
                )));
            }
        }
        let actor = Mlp::from_params(&actor_sizes, cur.f64s(param_count(&actor_sizes))?)
            .expect("sizes validated");
        let critic = Mlp::from_params(&critic_sizes, cur.f64s(param_count(&critic_sizes))?)
            .expect("sizes validated");
        let log_std = cur.f64s(1)?[0];
        if cur.pos != bytes.len() {
            return Err(ArtifactError::TrailingBytes(bytes.len() - cur.pos));
        }
        let params = Self {
            actor,
            critic,
            log_std,
        };
        if !params.is_finite() {
            return Err(ArtifactError::NonFinite);
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&log_std) {
            return Err(ArtifactError::InvalidLayout(format!("log_std {log_std} out of range")));
        }
        Ok(params)
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, ArtifactError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), ArtifactError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ArtifactError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        let end = self.pos.checked_add(n).ok_or(ArtifactError::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(ArtifactError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, ArtifactError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn sizes(&mut self, name: &str) -> Result<Vec<usize>, ArtifactError> {
        let n = self.u32()?;
        if !(2..=MAX_LAYERS).contains(&n) {
            return Err(ArtifactError::InvalidLayout(format!("{name} has {n} layer sizes")));
        }
        (0..n)
            .map(|_| {
                let s = self.u32()?;
                if s == 0 || s > MAX_WIDTH {
                    Err(ArtifactError::InvalidLayout(format!("{name} layer width {s}")))
                } else {
                    Ok(s as usize)
                }
            })
            .collect()
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ArtifactError> {
        let raw = self.take(n.checked_mul(8).ok_or(ArtifactError::Truncated)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
