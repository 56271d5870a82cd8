//! Deployment runtime: read pitch from a HIL backend, estimate velocity,
//! apply the greedy action as `(u, −u)` and keep a fixed sample time.
//!
//! The vendor hardware path is only the [`HilBackend`] trait; [`MockHil`]
//! drives a simulated plant instead.

mod backend;
mod clock;
mod control_loop;
mod filter;

pub use backend::{mock_hil, BackendFault, HilBackend, MockHil};
pub use clock::{Clock, MonotonicClock, VirtualClock};
pub use control_loop::{run_control_loop, DeployError, LoopConfig, LoopReport, VelocitySource};
pub use filter::{biquad_step, estimate_velocity, Biquad, VelocityEstimator};
