//! Piecewise-constant target pitch r(t).

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Slack used when converting times to hold-interval indices, so that
/// `t = k × 0.1` lands in the interval it nominally starts.
const INDEX_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSchedule {
    /// Seconds each target value is held.
    pub hold_duration: f64,
    pub mode: ScheduleMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleMode {
    /// One uniform draw from `[lo, hi]` per hold interval.
    RandomUniform { lo: f64, hi: f64, seed: u64 },
    /// Explicit values; the last one is held once the list runs out.
    FixedSequence { values: Vec<f64> },
}

impl Default for TargetSchedule {
    fn default() -> Self {
        Self {
            hold_duration: 10.0,
            mode: ScheduleMode::RandomUniform {
                lo: -0.4,
                hi: 0.4,
                seed: 0,
            },
        }
    }
}

impl TargetSchedule {
    pub fn fixed(hold_duration: f64, values: Vec<f64>) -> Self {
        Self {
            hold_duration,
            mode: ScheduleMode::FixedSequence { values },
        }
    }

    /// Target sequence used for evaluation and deployment runs.
    pub fn evaluation_default() -> Self {
        Self::fixed(10.0, vec![0.2, -0.2, 0.3, 0.0, -0.3, 0.1, -0.1, 0.25])
    }

    /// Seed of a random schedule, if any.
    pub fn seed(&self) -> Option<u64> {
        match self.mode {
            ScheduleMode::RandomUniform { seed, .. } => Some(seed),
            ScheduleMode::FixedSequence { .. } => None,
        }
    }

    /// Checks the schedule against the agent sample time and the pitch bounds.
    /// Errors name the offending field.
    pub fn validate(&self, sample_time: f64, bounds: (f64, f64)) -> Result<(), (String, String)> {
        let bad = |f: &str, r: String| Err((f.to_owned(), r));
        if !(self.hold_duration.is_finite() && self.hold_duration > 0.0) {
            return bad("hold_duration", format!("{} is not positive", self.hold_duration));
        }
        let ratio = self.hold_duration / sample_time;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad(
                "hold_duration",
                format!(
                    "{} s is not a whole number of {} s agent steps",
                    self.hold_duration, sample_time
                ),
            );
        }
        let in_bounds = |v: f64| v.is_finite() && v >= bounds.0 && v <= bounds.1;
        match &self.mode {
            ScheduleMode::RandomUniform { lo, hi, .. } => {
                if !in_bounds(*lo) {
                    return bad("lo", format!("{lo} outside [{}, {}]", bounds.0, bounds.1));
                }
                if !in_bounds(*hi) {
                    return bad("hi", format!("{hi} outside [{}, {}]", bounds.0, bounds.1));
                }
                if lo > hi {
                    return bad("lo", format!("lo {lo} exceeds hi {hi}"));
                }
            }
            ScheduleMode::FixedSequence { values } => {
                if values.is_empty() {
                    return bad("values", "sequence is empty".into());
                }
                if let Some(v) = values.iter().find(|v| !in_bounds(**v)) {
                    return bad("values", format!("{v} outside [{}, {}]", bounds.0, bounds.1));
                }
            }
        }
        Ok(())
    }

    /// Draws the concrete targets for `intervals` hold intervals.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R, intervals: usize) -> TargetProfile {
        let values = match &self.mode {
            ScheduleMode::RandomUniform { lo, hi, .. } => (0..intervals)
                .map(|_| if lo == hi { *lo } else { rng.random_range(*lo..=*hi) })
                .collect(),
            ScheduleMode::FixedSequence { values } => values.clone(),
        };
        TargetProfile {
            hold_duration: self.hold_duration,
            values,
        }
    }
}

/// A realized schedule: concrete values, one per hold interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetProfile {
    pub hold_duration: f64,
    pub values: Vec<f64>,
}

impl TargetProfile {
    pub fn constant(value: f64) -> Self {
        Self {
            hold_duration: f64::INFINITY,
            values: vec![value],
        }
    }

    /// Interval `⌊t / hold⌋`, left-closed, clamped to the last value.
    pub fn interval_at(&self, t: f64) -> usize {
        let idx = (t / self.hold_duration + INDEX_SLACK).floor();
        (idx.max(0.0) as usize).min(self.values.len().saturating_sub(1))
    }

    pub fn target_at(&self, t: f64) -> f64 {
        self.values[self.interval_at(t)]
    }
}

/// Target value in force at time `t`.
pub fn target_at(profile: &TargetProfile, t: f64) -> f64 {
    profile.target_at(t)
}
