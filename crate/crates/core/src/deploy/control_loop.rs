use std::f64::consts::PI;
use std::io::{self, Write};
use std::time::Duration;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{BackendFault, HilBackend};
use super::clock::Clock;
use super::filter::VelocityEstimator;
use crate::env::{fmt_f64, DeployColumns, EpisodeTrace, Observation, TargetSchedule, TraceRow};
use crate::env::{DEPLOY_EXTRA_HEADER, ENV_TRACE_HEADER};
use crate::ppo::PolicyParams;

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("backend fault: {0}")]
    Backend(#[from] BackendFault),
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error("velocity bypass requested but the backend has no velocity output")]
    NoVelocityOutput,
    #[error("trace output: {0}")]
    Io(#[from] io::Error),
}

/// Where the policy's `omega` input comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocitySource {
    /// Filtered backward difference of the pitch samples.
    #[default]
    Estimator,
    /// The backend's own velocity measurement (simulation only).
    Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// Seconds between ticks.
    pub sample_time: f64,
    /// Seconds of operation; `duration / sample_time` ticks run.
    pub duration: f64,
    pub schedule: TargetSchedule,
    /// Velocity low-pass cutoff in Hz; must be below Nyquist.
    pub cutoff_hz: f64,
    pub velocity_source: VelocitySource,
    pub action_low: f64,
    pub action_high: f64,
    pub obs_low: f64,
    pub obs_high: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            sample_time: 0.1,
            duration: 80.0,
            schedule: TargetSchedule::evaluation_default(),
            cutoff_hz: 1.0,
            velocity_source: VelocitySource::Estimator,
            action_low: -24.0,
            action_high: 24.0,
            obs_low: -PI,
            obs_high: PI,
        }
    }
}

impl LoopConfig {
    pub fn ticks(&self) -> usize {
        (self.duration / self.sample_time).round() as usize
    }

    pub fn period(&self) -> Duration {
        Duration::from_nanos((self.sample_time * 1e9).round() as u64)
    }

    pub fn validate(&self) -> Result<(), DeployError> {
        let bad = |m: String| Err(DeployError::Config(m));
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return bad(format!("sample_time {} is not positive", self.sample_time));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} is not positive", self.duration));
        }
        let nyquist = 0.5 / self.sample_time;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist) {
            return bad(format!("cutoff_hz {} must lie in (0, {nyquist})", self.cutoff_hz));
        }
        if !(self.action_low < self.action_high && self.obs_low < self.obs_high) {
            return bad("bounds must satisfy low < high".into());
        }
        self.schedule
            .validate(self.sample_time, (self.obs_low, self.obs_high))
            .map_err(|(field, reason)| DeployError::Config(format!("schedule `{field}`: {reason}")))
    }
}

/// Everything a loop run produced.
#[derive(Debug, Clone, Default)]
pub struct LoopReport {
    pub trace: EpisodeTrace,
    /// Clock reading when each tick started its work.
    pub tick_starts: Vec<Duration>,
    /// Absolute deadline of each tick: `start + k × period`.
    pub deadlines: Vec<Duration>,
    pub overruns: usize,
}

impl LoopReport {
    /// Mean spacing of tick starts.
    pub fn mean_period(&self) -> Option<Duration> {
        let n = self.tick_starts.len();
        (n >= 2).then(|| (self.tick_starts[n - 1] - self.tick_starts[0]) / (n as u32 - 1))
    }
}

/// Runs the greedy policy against `backend` at a fixed rate.
///
/// Tick `k` is due at `start + k·period`. The loop sleeps until the deadline;
/// if it is already late it runs immediately and flags the tick as an
/// overrun. Deadlines never shift, so lateness does not accumulate.
///
/// Rows are streamed to `sink` (CSV with the deployment columns) as they
/// are produced; the sink is flushed before returning, error or not.
pub fn run_control_loop<B: HilBackend + ?Sized>(
    config: &LoopConfig,
    policy: &PolicyParams,
    backend: &mut B,
    clock: &dyn Clock,
    mut sink: Option<&mut dyn Write>,
) -> Result<LoopReport, DeployError> {
    config.validate()?;
    if config.velocity_source == VelocitySource::Backend && !backend.has_velocity_output() {
        return Err(DeployError::NoVelocityOutput);
    }
    if let Some(out) = sink.as_deref_mut() {
        let mut header: Vec<&str> = ENV_TRACE_HEADER.to_vec();
        header.extend(DEPLOY_EXTRA_HEADER);
        writeln!(out, "{}", header.join(","))?;
    }
    let result = tick_loop(config, policy, backend, clock, &mut sink);
    if let Some(out) = sink {
        out.flush()?;
    }
    result
}

fn tick_loop<B: HilBackend + ?Sized>(
    config: &LoopConfig,
    policy: &PolicyParams,
    backend: &mut B,
    clock: &dyn Clock,
    sink: &mut Option<&mut dyn Write>,
) -> Result<LoopReport, DeployError> {
    let n_ticks = config.ticks();
    let period = config.period();
    let dt = config.sample_time;
    let steps_per_hold = (config.schedule.hold_duration / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.schedule.seed().unwrap_or(0));
    let profile = config.schedule.realize(&mut rng, n_ticks.div_ceil(steps_per_hold));
    let bounds = (config.action_low, config.action_high);
    let mut estimator = VelocityEstimator::new(config.cutoff_hz, dt);

    let mut report = LoopReport {
        trace: EpisodeTrace {
            rows: Vec::with_capacity(n_ticks),
            deploy: Some(Vec::with_capacity(n_ticks)),
        },
        ..Default::default()
    };
    let start = clock.now();

    for k in 0..n_ticks {
        let deadline = start + period * k as u32;
        let overrun = k > 0 && clock.now() > deadline;
        if overrun {
            report.overruns += 1;
            warn!("tick {k} overran its deadline by {:?}", clock.now() - deadline);
        } else {
            clock.sleep_until(deadline);
        }
        report.deadlines.push(deadline);
        report.tick_starts.push(clock.now());

        let pitch = backend.read_pitch()?;
        let omega_hat = estimator.update(pitch, dt);
        let measured = backend.read_velocity();
        let omega = match config.velocity_source {
            VelocitySource::Estimator => omega_hat,
            VelocitySource::Backend => measured.ok_or(DeployError::NoVelocityOutput)?,
        };
        let target = profile.values[(k / steps_per_hold).min(profile.values.len() - 1)];
        let obs = Observation {
            delta: (target - pitch).clamp(config.obs_low, config.obs_high),
            omega: omega.clamp(config.obs_low, config.obs_high),
        };
        let u = policy.greedy_action(&obs, bounds);
        backend.write_voltages(u, -u)?;

        let row = TraceRow {
            t_s: k as f64 * dt,
            target_rad: target,
            pitch_rad: pitch,
            omega_rad_s: measured.unwrap_or(omega_hat),
            action_v: u,
            reward: -(target - pitch).abs(),
        };
        let extra = DeployColumns {
            omega_hat_rad_s: omega_hat,
            overrun,
        };
        if let Some(out) = sink.as_deref_mut() {
            let fields = [row.t_s, row.target_rad, row.pitch_rad, row.omega_rad_s, row.action_v, row.reward, omega_hat];
            let line = fields.map(fmt_f64).join(",");
            writeln!(out, "{line},{}", u8::from(overrun))?;
        }
        report.trace.rows.push(row);
        report.trace.deploy.as_mut().expect("deploy columns").push(extra);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::deploy::backend::mock_hil;
    use crate::deploy::clock::VirtualClock;
    use crate::env::TwinPlant;

    #[test]
    fn zero_policy_rests() {
        let clock = Arc::new(VirtualClock::new());
        let mut hil = mock_hil(TwinPlant::default(), clock.clone()).unwrap();
        let config = LoopConfig {
            duration: 10.0,
            schedule: TargetSchedule::fixed(10.0, vec![0.0]),
            ..Default::default()
        };
        let report = run_control_loop(&config, &PolicyParams::zeros(), &mut hil, clock.as_ref(), None).unwrap();
        assert_eq!(report.trace.len(), 100);
        for row in &report.trace.rows {
            assert_eq!((row.pitch_rad, row.omega_rad_s, row.action_v, row.reward), (0.0, 0.0, 0.0, 0.0));
        }
        assert_eq!(report.overruns, 0);
        assert_eq!(report.mean_period(), Some(Duration::from_millis(100)));
    }

    /// Backend whose reads take simulated time.
    struct Slow<B> {
        inner: B,
        clock: Arc<VirtualClock>,
        cost: Vec<Duration>,
        calls: usize,
    }

    impl<B: HilBackend> HilBackend for Slow<B> {
        fn read_pitch(&mut self) -> Result<f64, BackendFault> {
            let p = self.inner.read_pitch();
            self.clock.advance(self.cost[self.calls % self.cost.len()]);
            self.calls += 1;
            p
        }
        fn write_voltages(&mut self, v0: f64, v1: f64) -> Result<(), BackendFault> {
            self.inner.write_voltages(v0, v1)
        }
    }

    #[test]
    fn overruns_do_not_shift_deadlines() {
        let clock = Arc::new(VirtualClock::new());
        let inner = mock_hil(TwinPlant::default(), clock.clone()).unwrap();
        let mut slow = Slow {
            inner,
            clock: clock.clone(),
            // Every fourth tick takes 250 ms, i.e. spills over two deadlines.
            cost: vec![Duration::from_millis(1), Duration::from_millis(1), Duration::from_millis(1), Duration::from_millis(250)],
            calls: 0,
        };
        let config = LoopConfig { duration: 4.0, ..Default::default() };
        let report = run_control_loop(&config, &PolicyParams::zeros(), &mut slow, clock.as_ref(), None).unwrap();
        assert!(report.overruns > 0);
        for (k, d) in report.deadlines.iter().enumerate() {
            assert_eq!(*d, Duration::from_millis(100) * k as u32);
        }
        // Late ticks start late, punctual ones exactly on their deadline.
        let flags = report.trace.deploy.as_ref().unwrap();
        for ((start, deadline), extra) in report.tick_starts.iter().zip(&report.deadlines).zip(flags) {
            assert_eq!(extra.overrun, start > deadline);
        }
    }

    #[test]
    fn bypass_needs_velocity_output() {
        struct NoVel;
        impl HilBackend for NoVel {
            fn read_pitch(&mut self) -> Result<f64, BackendFault> {
                Ok(0.0)
            }
            fn write_voltages(&mut self, _: f64, _: f64) -> Result<(), BackendFault> {
                Ok(())
            }
        }
        let config = LoopConfig { velocity_source: VelocitySource::Backend, ..Default::default() };
        let err = run_control_loop(&config, &PolicyParams::zeros(), &mut NoVel, &VirtualClock::new(), None);
        assert!(matches!(err, Err(DeployError::NoVelocityOutput)));
    }

    #[test]
    fn config_validation() {
        let above_nyquist = LoopConfig { cutoff_hz: 5.0, ..Default::default() };
        assert!(above_nyquist.validate().is_err());
        assert!(LoopConfig::default().validate().is_ok());
        assert_eq!(LoopConfig::default().ticks(), 800);
    }

    #[test]
    fn sink_receives_csv() {
        let clock = Arc::new(VirtualClock::new());
        let mut hil = mock_hil(TwinPlant::default(), clock.clone()).unwrap();
        let config = LoopConfig { duration: 1.0, ..Default::default() };
        let mut buf = Vec::new();
        let report = run_control_loop(
            &config,
            &PolicyParams::linear_feedback(1.0, -0.5),
            &mut hil,
            clock.as_ref(),
            Some(&mut buf),
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), report.trace.to_csv_string());
    }
}
