// Reference 1-DOF pitch plant exported through the flat plant ABI.
//
// Compiled by build.rs straight to a cdylib; it is never linked into Rust code.
// Dynamics: J*theta'' + D*theta' + K_s*theta = K_t*(v0 - v1), classical RK4 at a
// fixed sub-step. Constants can be overridden at build time through the
// PLANTBRIDGE_AERO_{J,D,KS,KT,H} environment variables (see build.rs).

#![allow(non_upper_case_globals)]
#![allow(static_mut_refs)]

include!(env!("PLANT_PARAMS_RS"));

#[repr(C)]
pub struct ExtU {
    pub v0: f64,
    pub v1: f64,
}

#[repr(C)]
pub struct ExtY {
    pub pitch: f64,
    pub velocity: f64,
}

#[no_mangle]
pub static mut aero_U: ExtU = ExtU { v0: 0.0, v1: 0.0 };

#[no_mangle]
pub static mut aero_Y: ExtY = ExtY { pitch: 0.0, velocity: 0.0 };

static mut THETA: f64 = 0.0;
static mut OMEGA: f64 = 0.0;
static mut ACTIVE: bool = false;

fn accel(theta: f64, omega: f64, v0: f64, v1: f64) -> f64 {
    (TORQUE_GAIN * (v0 - v1) - DAMPING * omega - STIFFNESS * theta) / INERTIA
}

#[no_mangle]
pub extern "C" fn aero_initialize() {
    unsafe {
        THETA = 0.0;
        OMEGA = 0.0;
        aero_Y.pitch = 0.0;
        aero_Y.velocity = 0.0;
        ACTIVE = true;
    }
}

#[no_mangle]
pub extern "C" fn aero_step() {
    unsafe {
        if !ACTIVE {
            aero_Y.pitch = f64::NAN;
            aero_Y.velocity = f64::NAN;
            return;
        }
        let (v0, v1) = (aero_U.v0, aero_U.v1);
        let h = SUBSTEP;
        let (th, om) = (THETA, OMEGA);

        let k1t = om;
        let k1w = accel(th, om, v0, v1);
        let k2t = om + 0.5 * h * k1w;
        let k2w = accel(th + 0.5 * h * k1t, om + 0.5 * h * k1w, v0, v1);
        let k3t = om + 0.5 * h * k2w;
        let k3w = accel(th + 0.5 * h * k2t, om + 0.5 * h * k2w, v0, v1);
        let k4t = om + h * k3w;
        let k4w = accel(th + h * k3t, om + h * k3w, v0, v1);

        THETA = th + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        OMEGA = om + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        aero_Y.pitch = THETA;
        aero_Y.velocity = OMEGA;
    }
}

#[cfg(not(omit_terminate))]
#[no_mangle]
pub extern "C" fn aero_terminate() {
    unsafe {
        ACTIVE = false;
    }
}
