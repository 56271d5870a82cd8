//! Second-order Butterworth low-pass and the velocity estimator built on it.

use std::f64::consts::PI;

/// Biquad section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    z1: f64,
    z2: f64,
    sample_time: f64,
}

impl Biquad {
    /// Butterworth low-pass (Q = 1/√2), bilinear transform prewarped so the
    /// −3 dB point lands exactly on `cutoff_hz`.
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_time: f64) -> Self {
        assert!(
            cutoff_hz > 0.0 && cutoff_hz < 0.5 / sample_time,
            "cutoff {cutoff_hz} Hz must lie in (0, Nyquist)"
        );
        let q = std::f64::consts::FRAC_1_SQRT_2;
        let k = (PI * cutoff_hz * sample_time).tan();
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Self {
            b0,
            b1: 2.0 * b0,
            b2: b0,
            a1: 2.0 * (k * k - 1.0) * norm,
            a2: (1.0 - k / q + k * k) * norm,
            z1: 0.0,
            z2: 0.0,
            sample_time,
        }
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Both poles strictly inside the unit circle (Jury conditions).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz * self.sample_time;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num = ((self.b0 + self.b1 * c1 + self.b2 * c2).powi(2) + (self.b1 * s1 + self.b2 * s2).powi(2)).sqrt();
        let den = ((1.0 + self.a1 * c1 + self.a2 * c2).powi(2) + (self.a1 * s1 + self.a2 * s2).powi(2)).sqrt();
        num / den
    }

    pub fn reset(&mut self) {
        self.z1 = 0.0;
        self.z2 = 0.0;
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }
}

/// Functional form of [`Biquad::step`].
pub fn biquad_step(state: &Biquad, x: f64) -> (Biquad, f64) {
    let mut next = *state;
    let y = next.step(x);
    (next, y)
}

/// Angular velocity from sampled pitch: backward difference, then low-pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimator {
    filter: Biquad,
    last_pitch: f64,
    primed: bool,
}

impl VelocityEstimator {
    pub fn new(cutoff_hz: f64, sample_time: f64) -> Self {
        Self {
            filter: Biquad::butterworth_lowpass(cutoff_hz, sample_time),
            last_pitch: 0.0,
            primed: false,
        }
    }

    pub fn filter(&self) -> &Biquad {
        &self.filter
    }

    /// Feeds one pitch sample taken `dt` after the previous one. The very
    /// first sample only primes the difference and yields 0.
    pub fn update(&mut self, pitch: f64, dt: f64) -> f64 {
        if !self.primed {
            self.primed = true;
            self.last_pitch = pitch;
            return 0.0;
        }
        let diff = (pitch - self.last_pitch) / dt;
        self.last_pitch = pitch;
        self.filter.step(diff)
    }

    pub fn reset(&mut self) {
        self.filter.reset();
        self.primed = false;
        self.last_pitch = 0.0;
    }
}

pub fn estimate_velocity(est: &VelocityEstimator, pitch: f64, dt: f64) -> (VelocityEstimator, f64) {
    let mut next = *est;
    let omega = next.update(pitch, dt);
    (next, omega)
}
