//! Train reinforcement-learning policies against compiled plant models and
//! deploy them through a fixed-rate control loop.
//!
//! - [`plant_abi`]: load and drive any shared library exporting the
//!   `<model>_initialize/_step/_terminate/_U/_Y` plant ABI.
//! - [`env`]: the pitch-tracking environment, target schedules, traces and
//!   the in-process twin of the reference plant.
//! - [`ppo`]: actor-critic PPO with GAE, training and greedy evaluation.
//! - [`deploy`]: velocity estimation, HIL backends and the deadline-driven
//!   control loop.

pub mod deploy;
pub mod env;
pub mod plant_abi;
pub mod ppo;

pub use env::{
    make_env, Env, EnvConfig, EnvError, EpisodeTrace, Observation, StepResult, TargetSchedule,
    TwinPlant,
};
pub use plant_abi::{load_plant, InputBlock, Lifecycle, OutputBlock, Plant, PlantError, PlantHandle};
pub use ppo::{return_to_mean_deviation_deg, PolicyParams, PpoHyper, TrainingLog};
