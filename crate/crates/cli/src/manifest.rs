//! Content-addressed run manifest: input and artifact hashes plus seeds.
//! No timestamps, so identical runs produce identical manifests.

use crate::error::{AppError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub tool_version: String,
    /// Input file name -> sha256.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name -> sha256.
    pub artifacts: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
}

impl Manifest {
    pub fn new() -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            seeds: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.insert(name.to_string(), hash_file(path)?);
        Ok(())
    }

    pub fn record_artifact(&mut self, name: &str, path: &Path) -> Result<()> {
        self.artifacts.insert(name.to_string(), hash_file(path)?);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fails when a recorded input no longer hashes to the same value.
    pub fn verify_inputs(&self, named_paths: &[(&str, &Path)]) -> Result<()> {
        for (name, path) in named_paths {
            let Some(expected) = self.inputs.get(*name) else {
                continue;
            };
            let actual = hash_file(path)?;
            if &actual != expected {
                return Err(AppError::data(format!(
                    "bundle was fitted on a different '{name}' (hash {expected} != {actual}); \
                     refusing to mix bundles and data"
                )));
            }
        }
        Ok(())
    }
}

impl Default for Manifest {
    fn default() -> Self {
        Self::new()
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| AppError::data(format!("cannot hash {}: {e}", path.display())))?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
