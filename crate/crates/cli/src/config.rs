//! JSON run configurations: `SimulationConfig` with the model written as a
//! spec string.

use std::path::Path;

use anyhow::{Context, Result};
use entbound_core::montecarlo::Centering;
use serde::Deserialize;

use crate::model_spec::ModelSpec;

pub const DEFAULT_SLACK: f64 = 1e-6;
pub const DEFAULT_REPLICATES: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub model: String,
    pub n: u64,
    pub eps: OneOrMany,
    #[serde(default)]
    pub replicates: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub entropy_tolerance: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub slack: Option<f64>,
    #[serde(default)]
    pub centering: Option<Centering>,
}

/// One document or a list of them.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    One(ConfigDoc),
    Many(Vec<ConfigDoc>),
}

/// Error while reading a config file; reported as a usage error.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load(path: &Path) -> Result<Vec<ConfigDoc>> {
    let body = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let file: ConfigFile = serde_json::from_str(&body).map_err(|e| {
        ConfigError(format!(
            "config {} is not a valid run configuration: {e}",
            path.display()
        ))
    })?;
    Ok(match file {
        ConfigFile::One(doc) => vec![doc],
        ConfigFile::Many(docs) => docs,
    })
}

impl ConfigDoc {
    pub fn spec(&self) -> Result<ModelSpec> {
        Ok(self.model.parse::<ModelSpec>()?)
    }
}
