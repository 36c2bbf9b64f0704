use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

/// SHA-256 of the config rendered as JSON with sorted keys and no
/// insignificant whitespace.
pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    // serde_json::Value keeps object keys in a BTreeMap, so this sorts them
    let value = serde_json::to_value(config)?;
    let text = serde_json::to_string(&value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}
