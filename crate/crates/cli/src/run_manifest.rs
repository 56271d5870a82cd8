//! Record of what a command was asked to do, written before it starts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const FILE_NAME: &str = "run_manifest.toml";

/// Source revision the binary was built from.
pub const GIT_DESCRIBE: &str = env!("PLANTBRIDGE_GIT_DESCRIBE");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub git_describe: String,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Paths relative to `output_dir`.
    pub artifacts: Vec<PathBuf>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config: RunConfig, seeds: Vec<u64>, output_dir: &Path) -> Self {
        Self {
            command: command.into(),
            git_describe: GIT_DESCRIBE.to_owned(),
            seeds,
            output_dir: output_dir.to_path_buf(),
            artifacts: Vec::new(),
            config,
        }
    }

    /// Writes `run_manifest.toml` into the output directory via a temporary
    /// file and a rename, so readers never see a partial manifest.
    pub fn write_atomic(&self) -> anyhow::Result<PathBuf> {
        let path = self.output_dir.join(FILE_NAME);
        let tmp = self.output_dir.join(format!(".{FILE_NAME}.tmp"));
        let text = toml::to_string(self).context("serializing run manifest")?;
        let mut file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        file.write_all(text.as_bytes())?;
        file.sync_all()?;
        drop(file);
        fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
        Ok(path)
    }

    #[cfg(test)]
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    /// Artifacts that do not exist (yet).
    pub fn missing_artifacts(&self) -> Vec<PathBuf> {
        self.artifacts
            .iter()
            .filter(|a| !self.output_dir.join(a).exists())
            .cloned()
            .collect()
    }
}
