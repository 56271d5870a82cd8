//! In-process twin of the reference pitch plant.
//!
//! Same dynamics and the same RK4 arithmetic as the shared-library plant,
//! evaluated natively. It serves as the oracle for the FFI path and as a
//! drop-in [`Plant`] when no library is needed.

use crate::plant_abi::{check_outputs, InputBlock, Lifecycle, OutputBlock, Plant, PlantError};

/// Constants of the linear damped pitch model
/// `J·θ̈ + D·θ̇ + K_s·θ = K_t·(v0 − v1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroParams {
    /// Pitch inertia J, kg·m².
    pub inertia: f64,
    /// Viscous damping D, N·m·s/rad.
    pub damping: f64,
    /// Restoring stiffness K_s, N·m/rad.
    pub stiffness: f64,
    /// Voltage-to-torque gain K_t, N·m/V.
    pub torque_gain: f64,
    /// Integration sub-step h, seconds.
    pub substep_s: f64,
}

impl Default for AeroParams {
    fn default() -> Self {
        Self {
            inertia: 0.0217,
            damping: 0.0071,
            stiffness: 0.0104,
            torque_gain: 0.0045,
            substep_s: 0.02,
        }
    }
}

impl AeroParams {
    /// Builds params from `[J, D, K_s, K_t, h]`.
    pub fn from_array(p: [f64; 5]) -> Self {
        Self {
            inertia: p[0],
            damping: p[1],
            stiffness: p[2],
            torque_gain: p[3],
            substep_s: p[4],
        }
    }

    /// Pitch the plant settles at under constant inputs.
    pub fn steady_state_pitch(&self, inputs: InputBlock) -> f64 {
        self.torque_gain * (inputs.v0 - inputs.v1) / self.stiffness
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwinState {
    pub theta: f64,
    pub omega: f64,
    /// Completed sub-steps; plant time is `substeps × h`.
    pub substeps: u64,
}

impl TwinState {
    pub fn at(theta: f64, omega: f64) -> Self {
        Self {
            theta,
            omega,
            substeps: 0,
        }
    }

    pub fn time_s(&self, params: &AeroParams) -> f64 {
        self.substeps as f64 * params.substep_s
    }
}

fn accel(theta: f64, omega: f64, inputs: InputBlock, p: &AeroParams) -> f64 {
    (p.torque_gain * (inputs.v0 - inputs.v1) - p.damping * omega - p.stiffness * theta) / p.inertia
}

/// State derivative `(θ̇, ω̇)`.
pub fn dynamics(state: &TwinState, inputs: InputBlock, params: &AeroParams) -> (f64, f64) {
    (state.omega, accel(state.theta, state.omega, inputs, params))
}

/// One classical RK4 sub-step with inputs held.
pub fn substep(state: &TwinState, inputs: InputBlock, params: &AeroParams) -> Result<TwinState, PlantError> {
    let next = rk4(state, inputs, params);
    check_outputs(OutputBlock {
        pitch: next.theta,
        velocity: next.omega,
    })?;
    Ok(next)
}

// Kept term-for-term identical to the library plant so both produce the same bits.
fn rk4(state: &TwinState, inputs: InputBlock, p: &AeroParams) -> TwinState {
    let h = p.substep_s;
    let (th, om) = (state.theta, state.omega);

    let k1t = om;
    let k1w = accel(th, om, inputs, p);
    let k2t = om + 0.5 * h * k1w;
    let k2w = accel(th + 0.5 * h * k1t, om + 0.5 * h * k1w, inputs, p);
    let k3t = om + 0.5 * h * k2w;
    let k3w = accel(th + 0.5 * h * k2t, om + 0.5 * h * k2w, inputs, p);
    let k4t = om + h * k3w;
    let k4w = accel(th + h * k3t, om + h * k3w, inputs, p);

    TwinState {
        theta: th + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
        omega: om + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
        substeps: state.substeps + 1,
    }
}

/// One agent period: `substeps` RK4 sub-steps with `(u, −u)` held.
pub fn twin_step(
    state: &TwinState,
    u: f64,
    params: &AeroParams,
    substeps: usize,
) -> Result<TwinState, PlantError> {
    let inputs = InputBlock::differential(u);
    (0..substeps).try_fold(*state, |s, _| substep(&s, inputs, params))
}

/// The twin wrapped in the plant lifecycle, so it can stand wherever a
/// loaded library can.
#[derive(Debug, Clone)]
pub struct TwinPlant {
    params: AeroParams,
    state: TwinState,
    inputs: InputBlock,
    lifecycle: Lifecycle,
}

impl TwinPlant {
    pub fn new(params: AeroParams) -> Self {
        Self {
            params,
            state: TwinState::default(),
            inputs: InputBlock::default(),
            lifecycle: Lifecycle::Loaded,
        }
    }

    pub fn params(&self) -> &AeroParams {
        &self.params
    }

    pub fn state(&self) -> &TwinState {
        &self.state
    }

    fn require(&self, op: &'static str, allowed: &[Lifecycle]) -> Result<(), PlantError> {
        if allowed.contains(&self.lifecycle) {
            Ok(())
        } else {
            Err(PlantError::WrongLifecycleState {
                op,
                state: self.lifecycle,
            })
        }
    }
}

impl Default for TwinPlant {
    fn default() -> Self {
        Self::new(AeroParams::default())
    }
}

impl Plant for TwinPlant {
    fn lifecycle(&self) -> Lifecycle {
        self.lifecycle
    }

    fn substep_size_s(&self) -> f64 {
        self.params.substep_s
    }

    fn initialize(&mut self) -> Result<(), PlantError> {
        self.require("initialize", &[Lifecycle::Loaded, Lifecycle::Terminated])?;
        self.state = TwinState::default();
        self.lifecycle = Lifecycle::Initialized;
        Ok(())
    }

    fn step(&mut self) -> Result<(), PlantError> {
        self.require("step", &[Lifecycle::Initialized])?;
        self.state = substep(&self.state, self.inputs, &self.params)?;
        Ok(())
    }

    fn write_inputs(&mut self, block: InputBlock) -> Result<(), PlantError> {
        self.require("write_inputs", &[Lifecycle::Initialized])?;
        if !block.is_finite() {
            return Err(PlantError::NonFiniteInput(vec![block.v0, block.v1]));
        }
        self.inputs = block;
        Ok(())
    }

    fn read_outputs(&self) -> Result<OutputBlock, PlantError> {
        self.require("read_outputs", &[Lifecycle::Initialized])?;
        Ok(OutputBlock {
            pitch: self.state.theta,
            velocity: self.state.omega,
        })
    }

    fn terminate(&mut self) -> Result<(), PlantError> {
        self.require("terminate", &[Lifecycle::Initialized])?;
        self.lifecycle = Lifecycle::Terminated;
        Ok(())
    }

    fn substeps(&self) -> u64 {
        self.state.substeps
    }
}
