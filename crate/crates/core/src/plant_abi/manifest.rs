//! Plant manifest: the small key-value file shipped next to a plant library
//! that names its model and lays out its exported data blocks.
//!
//! ```text
//! model_name = aero
//! substep_size_s = 0.02
//! inputs = v0,v1
//! outputs = pitch,velocity
//! ```

use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use super::{is_valid_identifier, DEFAULT_SUBSTEP_S};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifestError {
    #[error("cannot read manifest: {0}")]
    Io(String),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: &'static str, reason: String },
}

/// Names and order of the doubles in one exported data block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    fields: Vec<String>,
}

impl BlockLayout {
    pub fn new<S: Into<String>>(fields: impl IntoIterator<Item = S>) -> Self {
        Self {
            fields: fields.into_iter().map(Into::into).collect(),
        }
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f == name)
    }

    /// Byte offset of a field; every field is one 8-byte double, no padding.
    pub fn byte_offset(&self, name: &str) -> Option<usize> {
        self.index_of(name).map(|i| i * 8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantManifest {
    pub model_name: String,
    pub substep_size_s: f64,
    pub inputs: BlockLayout,
    pub outputs: BlockLayout,
}

impl PlantManifest {
    /// The layout every environment in this crate expects: `v0,v1` in,
    /// `pitch,velocity` out.
    pub fn standard(model_name: &str) -> Self {
        Self {
            model_name: model_name.to_owned(),
            substep_size_s: DEFAULT_SUBSTEP_S,
            inputs: BlockLayout::new(["v0", "v1"]),
            outputs: BlockLayout::new(["pitch", "velocity"]),
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ManifestError::Io(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn to_text(&self) -> String {
        format!(
            "model_name = {}\nsubstep_size_s = {:?}\ninputs = {}\noutputs = {}\n",
            self.model_name,
            self.substep_size_s,
            self.inputs.fields().join(","),
            self.outputs.fields().join(","),
        )
    }
}

impl FromStr for PlantManifest {
    type Err = ManifestError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut model_name = None;
        let mut substep = None;
        let mut inputs = None;
        let mut outputs = None;

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or(ManifestError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let slot = match key {
                "model_name" => &mut model_name,
                "substep_size_s" => &mut substep,
                "inputs" => &mut inputs,
                "outputs" => &mut outputs,
                other => {
                    return Err(ManifestError::UnknownKey {
                        key: other.to_owned(),
                        line,
                    })
                }
            };
            if slot.replace(value.to_owned()).is_some() {
                return Err(ManifestError::DuplicateKey {
                    key: key.to_owned(),
                    line,
                });
            }
        }

        let model_name = model_name.ok_or(ManifestError::MissingKey("model_name"))?;
        if !is_valid_identifier(&model_name) {
            return Err(ManifestError::InvalidValue {
                key: "model_name",
                reason: format!("`{model_name}` is not an identifier"),
            });
        }

        let substep_size_s = match substep {
            None => DEFAULT_SUBSTEP_S,
            Some(s) => s.parse::<f64>().map_err(|e| ManifestError::InvalidValue {
                key: "substep_size_s",
                reason: e.to_string(),
            })?,
        };
        if !(substep_size_s.is_finite() && substep_size_s > 0.0) {
            return Err(ManifestError::InvalidValue {
                key: "substep_size_s",
                reason: format!("{substep_size_s} is not a positive duration"),
            });
        }

        Ok(Self {
            model_name,
            substep_size_s,
            inputs: parse_fields("inputs", inputs)?,
            outputs: parse_fields("outputs", outputs)?,
        })
    }
}

fn parse_fields(key: &'static str, value: Option<String>) -> Result<BlockLayout, ManifestError> {
    let value = value.ok_or(ManifestError::MissingKey(key))?;
    let fields: Vec<&str> = value.split(',').map(str::trim).collect();
    for (i, f) in fields.iter().enumerate() {
        if !is_valid_identifier(f) {
            return Err(ManifestError::InvalidValue {
                key,
                reason: format!("field `{f}` is not an identifier"),
            });
        }
        if fields[..i].contains(f) {
            return Err(ManifestError::InvalidValue {
                key,
                reason: format!("field `{f}` listed twice"),
            });
        }
    }
    Ok(BlockLayout::new(fields))
}
