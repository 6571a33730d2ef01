//! Run manifests: what was run, on which input, with which options.
//!
//! The manifest hash covers every field that influences results (command,
//! scenario bytes, overrides, principle and options) and leaves out the
//! output directory and timestamps, so two runs with equal hashes write
//! byte-identical tables.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The result-determining part of a manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunKey {
    pub command: String,
    pub scenario_sha256: String,
    pub overrides: Vec<String>,
    pub principles: Vec<String>,
    pub options: serde_json::Value,
}

impl RunKey {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("run key serializes").as_bytes())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub manifest_hash: String,
    pub scenario: String,
    pub scenario_name: String,
    #[serde(flatten)]
    pub key: RunKey,
    pub toggles: serde_json::Value,
    pub output_dir: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub tool_version: &'static str,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
