//! Deterministic run manifests: settings, input and output digests and a
//! summary, serialized with sorted keys and no timestamps.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub backends: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, FileDigest>,
    /// Output file name (relative to the output directory) to digest.
    pub outputs: BTreeMap<String, String>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            backends: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        if path.exists() {
            let d = FileDigest { path: path.display().to_string(), sha256: sha256_file(path)? };
            self.inputs.insert(name.to_string(), d);
        }
        Ok(())
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("summary value serializes"));
    }

    /// Digests every listed output in `dir` and writes `manifest.json`.
    pub fn write(mut self, dir: &Path, outputs: &[&str]) -> Result<()> {
        for name in outputs {
            self.outputs.insert(name.to_string(), sha256_file(&dir.join(name))?);
        }
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text).with_context(|| format!("writing manifest in {}", dir.display()))
    }
}
