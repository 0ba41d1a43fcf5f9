//! Config loading and run manifests.
//!
//! A manifest is a TOML file with a `[manifest]` header and the fully
//! resolved `[config]`. Any command that takes `--config` also accepts a
//! manifest, so a run can be reproduced from its own output directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use smooco_core::bench::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solvers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest: ManifestHeader,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: Option<ExperimentConfig>) -> Self {
        Self {
            manifest: ManifestHeader {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                seed,
                timestamp: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
                outputs: Vec::new(),
                sizes: None,
                solvers: None,
                suite: None,
            },
            config,
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string_pretty(self).context("serializing manifest")?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Error raised for unreadable or invalid configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parse an experiment config, either bare or wrapped in a manifest.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    let body = if table.contains_key("manifest") {
        match table.get("config") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => return Err(ConfigError("manifest has no [config] table".into())),
        }
    } else {
        table
    };
    let config: ExperimentConfig = toml::Value::Table(body)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError(format!("invalid config: {}", e.message())))?;
    config.validate().map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    Ok(config)
}

pub fn load_config(path: &Path) -> std::result::Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}
