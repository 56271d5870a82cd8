//! The compiled-plant ABI and a loader for libraries that implement it.
//!
//! A conforming library exports five unmangled symbols for a model `<m>`:
//! `<m>_initialize`, `<m>_step` and `<m>_terminate` (no arguments, no return
//! value, C calling convention) and the data blocks `<m>_U` and `<m>_Y`, each
//! a run of consecutive little-endian `f64`s whose field order comes from the
//! plant manifest.

mod loader;
mod manifest;

use std::fmt;

use thiserror::Error;

pub use loader::{load_plant, PlantHandle, PlantSymbols};
pub use manifest::{BlockLayout, ManifestError, PlantManifest};

/// Sub-step length assumed when no manifest says otherwise: five sub-steps
/// per 0.1 s agent period.
pub const DEFAULT_SUBSTEP_S: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lifecycle {
    Loaded,
    Initialized,
    Terminated,
}

impl fmt::Display for Lifecycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lifecycle::Loaded => "loaded",
            Lifecycle::Initialized => "initialized",
            Lifecycle::Terminated => "terminated",
        })
    }
}

/// Motor voltages written to the plant's input block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InputBlock {
    pub v0: f64,
    pub v1: f64,
}

impl InputBlock {
    pub fn new(v0: f64, v1: f64) -> Self {
        Self { v0, v1 }
    }

    /// Differential drive: `u` on motor 0, `-u` on motor 1.
    pub fn differential(u: f64) -> Self {
        Self { v0: u, v1: -u }
    }

    pub fn is_finite(&self) -> bool {
        self.v0.is_finite() && self.v1.is_finite()
    }
}

/// Snapshot of the plant's output block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutputBlock {
    /// Beam angle in radians.
    pub pitch: f64,
    /// Angular velocity in rad/s.
    pub velocity: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("cannot load plant library {path}: {reason}")]
    FileNotLoadable { path: String, reason: String },
    #[error("plant library does not export `{name}`")]
    MissingSymbol { name: String },
    #[error("a live handle for {path} already exists")]
    AlreadyLoaded { path: String },
    #[error("`{op}` is not allowed while the plant is {state}")]
    WrongLifecycleState { op: &'static str, state: Lifecycle },
    #[error("plant produced a non-finite output ({field} = {value})")]
    PlantFault { field: String, value: f64 },
    #[error("refusing to write non-finite inputs {0:?}")]
    NonFiniteInput(Vec<f64>),
    #[error("`{0}` is not a valid model name")]
    InvalidModelName(String),
    #[error("block layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

/// Anything that behaves like a compiled plant: the FFI handle, or the
/// in-process twin used as its oracle.
pub trait Plant {
    fn lifecycle(&self) -> Lifecycle;
    fn substep_size_s(&self) -> f64;
    fn initialize(&mut self) -> Result<(), PlantError>;
    fn step(&mut self) -> Result<(), PlantError>;
    fn write_inputs(&mut self, block: InputBlock) -> Result<(), PlantError>;
    fn read_outputs(&self) -> Result<OutputBlock, PlantError>;
    fn terminate(&mut self) -> Result<(), PlantError>;
    /// Completed sub-steps since the last initialize.
    fn substeps(&self) -> u64;

    /// Plant time, counted in whole sub-steps so it never accumulates
    /// rounding error.
    fn time_s(&self) -> f64 {
        self.substeps() as f64 * self.substep_size_s()
    }
}

impl<P: Plant + ?Sized> Plant for Box<P> {
    fn lifecycle(&self) -> Lifecycle {
        (**self).lifecycle()
    }
    fn substep_size_s(&self) -> f64 {
        (**self).substep_size_s()
    }
    fn initialize(&mut self) -> Result<(), PlantError> {
        (**self).initialize()
    }
    fn step(&mut self) -> Result<(), PlantError> {
        (**self).step()
    }
    fn write_inputs(&mut self, block: InputBlock) -> Result<(), PlantError> {
        (**self).write_inputs(block)
    }
    fn read_outputs(&self) -> Result<OutputBlock, PlantError> {
        (**self).read_outputs()
    }
    fn terminate(&mut self) -> Result<(), PlantError> {
        (**self).terminate()
    }
    fn substeps(&self) -> u64 {
        (**self).substeps()
    }
}

/// Letters, digits and underscores, not starting with a digit.
pub fn is_valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn check_outputs(out: OutputBlock) -> Result<OutputBlock, PlantError> {
    for (field, value) in [("pitch", out.pitch), ("velocity", out.velocity)] {
        if !value.is_finite() {
            return Err(PlantError::PlantFault {
                field: field.to_owned(),
                value,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers() {
        for ok in ["aero", "_x", "Model_2", "a"] {
            assert!(is_valid_identifier(ok), "{ok}");
        }
        for bad in ["", "2aero", "ae-ro", "a b", "aé"] {
            assert!(!is_valid_identifier(bad), "{bad}");
        }
    }

    #[test]
    fn differential_drive() {
        assert_eq!(InputBlock::differential(3.0), InputBlock::new(3.0, -3.0));
    }
}
