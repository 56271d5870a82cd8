//! Hardware-in-the-loop backends.

use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::clock::Clock;
use crate::plant_abi::{InputBlock, Lifecycle, Plant, PlantError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendFault {
    #[error("sensor returned non-finite pitch {0}")]
    NonFinitePitch(f64),
    #[error("refusing non-finite voltages ({0}, {1})")]
    NonFiniteVoltage(f64, f64),
    #[error("plant error: {0}")]
    Plant(#[from] PlantError),
}

/// The I/O surface the control loop needs from a rig: one encoder and two
/// analog voltage outputs.
pub trait HilBackend {
    /// Current beam angle in radians.
    fn read_pitch(&mut self) -> Result<f64, BackendFault>;
    /// Sets the motor voltages; they hold until the next write.
    fn write_voltages(&mut self, v0: f64, v1: f64) -> Result<(), BackendFault>;
    /// Whether [`HilBackend::read_velocity`] returns a measured velocity.
    fn has_velocity_output(&self) -> bool {
        false
    }
    /// Angular velocity at the last [`HilBackend::read_pitch`], if the
    /// backend can measure it.
    fn read_velocity(&mut self) -> Option<f64> {
        None
    }
}

/// A simulated rig: a [`Plant`] advanced in step with a [`Clock`].
///
/// Each read first runs every plant sub-step that has elapsed on the clock
/// since the mock was created, then samples the output block. Writes go
/// straight to the input block and hold between reads.
pub struct MockHil<P: Plant> {
    plant: P,
    clock: Arc<dyn Clock>,
    origin: Duration,
    substep_nanos: u64,
    last_velocity: f64,
}

/// Wraps `plant` (initializing it if needed) as a HIL backend on `clock`.
pub fn mock_hil<P: Plant>(plant: P, clock: Arc<dyn Clock>) -> Result<MockHil<P>, BackendFault> {
    MockHil::new(plant, clock)
}

impl<P: Plant> MockHil<P> {
    pub fn new(mut plant: P, clock: Arc<dyn Clock>) -> Result<Self, BackendFault> {
        if plant.lifecycle() != Lifecycle::Initialized {
            plant.initialize()?;
        }
        plant.write_inputs(InputBlock::default())?;
        let substep_nanos = (plant.substep_size_s() * 1e9).round() as u64;
        let origin = clock.now();
        Ok(Self {
            plant,
            clock,
            origin,
            substep_nanos,
            last_velocity: 0.0,
        })
    }

    pub fn plant(&self) -> &P {
        &self.plant
    }

    pub fn into_plant(self) -> P {
        self.plant
    }

    fn catch_up(&mut self) -> Result<(), BackendFault> {
        let elapsed = self.clock.now().saturating_sub(self.origin).as_nanos() as u64;
        let due = elapsed / self.substep_nanos;
        while self.plant.substeps() < due {
            self.plant.step()?;
        }
        Ok(())
    }
}

impl<P: Plant> HilBackend for MockHil<P> {
    fn read_pitch(&mut self) -> Result<f64, BackendFault> {
        self.catch_up()?;
        let out = self.plant.read_outputs()?;
        if !out.pitch.is_finite() {
            return Err(BackendFault::NonFinitePitch(out.pitch));
        }
        self.last_velocity = out.velocity;
        Ok(out.pitch)
    }

    fn write_voltages(&mut self, v0: f64, v1: f64) -> Result<(), BackendFault> {
        if !(v0.is_finite() && v1.is_finite()) {
            return Err(BackendFault::NonFiniteVoltage(v0, v1));
        }
        self.plant.write_inputs(InputBlock::new(v0, v1))?;
        Ok(())
    }

    fn has_velocity_output(&self) -> bool {
        true
    }

    fn read_velocity(&mut self) -> Option<f64> {
        Some(self.last_velocity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deploy::clock::VirtualClock;
    use crate::env::{make_env, EnvConfig, TargetSchedule, TwinPlant};
    use crate::plant_abi::OutputBlock;

    #[test]
    fn one_period_matches_env_step() {
        let clock = Arc::new(VirtualClock::new());
        let mut hil = mock_hil(TwinPlant::default(), clock.clone()).unwrap();
        assert_eq!(hil.read_pitch().unwrap(), 0.0);
        hil.write_voltages(5.0, -5.0).unwrap();
        clock.sleep_until(Duration::from_millis(100));
        let pitch = hil.read_pitch().unwrap();

        let config = EnvConfig {
            schedule: TargetSchedule::fixed(10.0, vec![0.0]),
            ..Default::default()
        };
        let mut env = make_env(config, TwinPlant::default()).unwrap();
        env.reset(None).unwrap();
        let r = env.step(5.0).unwrap();
        assert_eq!(pitch, r.info.pitch);
        assert_eq!(hil.read_velocity(), Some(r.info.velocity));
        assert_eq!(hil.plant().substeps(), 5);
    }

    #[test]
    fn voltages_hold_between_reads() {
        let clock = Arc::new(VirtualClock::new());
        let mut held = mock_hil(TwinPlant::default(), clock.clone()).unwrap();
        held.write_voltages(2.0, -2.0).unwrap();
        for k in 1..=3 {
            clock.sleep_until(Duration::from_millis(100 * k));
            held.read_pitch().unwrap();
        }

        let clock2 = Arc::new(VirtualClock::new());
        let mut rewritten = mock_hil(TwinPlant::default(), clock2.clone()).unwrap();
        for k in 1..=3 {
            rewritten.write_voltages(2.0, -2.0).unwrap();
            clock2.sleep_until(Duration::from_millis(100 * k));
            rewritten.read_pitch().unwrap();
        }
        assert_eq!(
            held.plant().read_outputs().unwrap(),
            rewritten.plant().read_outputs().unwrap()
        );
    }

    #[test]
    fn nan_from_plant_is_a_fault() {
        struct Broken;
        impl Plant for Broken {
            fn lifecycle(&self) -> Lifecycle {
                Lifecycle::Initialized
            }
            fn substep_size_s(&self) -> f64 {
                0.02
            }
            fn initialize(&mut self) -> Result<(), PlantError> {
                Ok(())
            }
            fn step(&mut self) -> Result<(), PlantError> {
                Ok(())
            }
            fn write_inputs(&mut self, _: InputBlock) -> Result<(), PlantError> {
                Ok(())
            }
            fn read_outputs(&self) -> Result<OutputBlock, PlantError> {
                Ok(OutputBlock { pitch: f64::NAN, velocity: 0.0 })
            }
            fn terminate(&mut self) -> Result<(), PlantError> {
                Ok(())
            }
            fn substeps(&self) -> u64 {
                0
            }
        }
        let mut hil = mock_hil(Broken, Arc::new(VirtualClock::new())).unwrap();
        assert!(matches!(hil.read_pitch(), Err(BackendFault::NonFinitePitch(_))));
        assert!(hil.write_voltages(f64::NAN, 0.0).is_err());
    }
}
