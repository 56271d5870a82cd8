//! The run configuration file: one TOML document drives train, eval and
//! deploy. Unknown keys are rejected everywhere.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use plantbridge::deploy::LoopConfig;
use plantbridge::plant_abi::PlantManifest;
use plantbridge::{EnvConfig, Plant, PlantHandle, PpoHyper, TargetSchedule, TwinPlant};
use serde::{Deserialize, Serialize};

use crate::exit::{fail, CmdResult, ExitCodeExt, CONFIG};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed; run `i` of a training batch uses `seed + i`.
    pub seed: u64,
    pub plant: PlantSection,
    pub env: EnvConfig,
    pub ppo: PpoHyper,
    pub deploy: LoopConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSource {
    /// A compiled plant library loaded through the plant ABI.
    #[default]
    Library,
    /// The in-process twin of the reference plant.
    Twin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub source: PlantSource,
    /// Plant library; the bundled reference plant when absent.
    pub library: Option<PathBuf>,
    /// Block-layout manifest; the standard layout when absent.
    pub manifest: Option<PathBuf>,
    pub model: String,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            source: PlantSource::Library,
            library: None,
            manifest: None,
            model: "aero".into(),
        }
    }
}

impl PlantSection {
    pub fn library_path(&self) -> PathBuf {
        self.library
            .clone()
            .unwrap_or_else(|| plantbridge_refplant::aero_lib().to_path_buf())
    }

    pub fn plant_manifest(&self) -> CmdResult<PlantManifest> {
        match &self.manifest {
            Some(path) => PlantManifest::from_path(path)
                .with_context(|| format!("plant manifest {}", path.display()))
                .exit_code(CONFIG),
            None => Ok(PlantManifest::standard(&self.model)),
        }
    }

    /// Sub-step the selected plant will report, without loading it.
    pub fn substep_size_s(&self) -> CmdResult<f64> {
        match self.source {
            PlantSource::Library => Ok(self.plant_manifest()?.substep_size_s),
            PlantSource::Twin => Ok(TwinPlant::default().substep_size_s()),
        }
    }

    /// Loads the plant. Failures to load or resolve symbols are
    /// configuration errors.
    pub fn open(&self) -> CmdResult<Box<dyn Plant + Send>> {
        match self.source {
            PlantSource::Library => {
                let manifest = self.plant_manifest()?;
                let lib = self.library_path();
                let handle = PlantHandle::load_with_manifest(&lib, &manifest)
                    .with_context(|| format!("plant {}", lib.display()))
                    .exit_code(CONFIG)?;
                Ok(Box::new(handle))
            }
            PlantSource::Twin => Ok(Box::new(TwinPlant::default())),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .exit_code(CONFIG)?;
        Self::parse(&text).with_context(|| format!("config {}", path.display())).exit_code(CONFIG)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load_or_default(path: Option<&Path>) -> CmdResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Validates the environment section against the plant's sub-step.
    pub fn validate_env(&self) -> CmdResult {
        let substep = self.plant.substep_size_s()?;
        self.env.validate(substep).exit_code(CONFIG)?;
        self.ppo.validate().exit_code(CONFIG)
    }
}

/// Reads a standalone target schedule file.
pub fn load_schedule(path: &Path) -> CmdResult<TargetSchedule> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading schedule {}", path.display()))
        .exit_code(CONFIG)?;
    toml::from_str(&text)
        .with_context(|| format!("schedule {}", path.display()))
        .exit_code(CONFIG)
}

/// Checks a schedule the way the environment would.
pub fn validate_schedule(schedule: &TargetSchedule, env: &EnvConfig) -> CmdResult {
    if let Err((field, reason)) = schedule.validate(env.agent_sample_time, (env.obs_low, env.obs_high)) {
        return fail(CONFIG, format!("invalid schedule field `{field}`: {reason}"));
    }
    Ok(())
}
