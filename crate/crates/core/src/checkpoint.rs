//! Versioned JSON checkpoint files for models and contexts.

use crate::error::{CoreError, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    version: u32,
    kind: String,
    payload: T,
}

pub fn save<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<()> {
    let envelope = Envelope {
        version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        payload,
    };
    let text = serde_json::to_string(&envelope)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let envelope: Envelope<T> = serde_json::from_str(&text).map_err(|e| {
        CoreError::Checkpoint(format!("{}: {e}", path.display()))
    })?;
    if envelope.version != CHECKPOINT_VERSION {
        return Err(CoreError::Checkpoint(format!(
            "{}: unsupported version {}",
            path.display(),
            envelope.version
        )));
    }
    if envelope.kind != kind {
        return Err(CoreError::Checkpoint(format!(
            "{}: expected kind '{kind}', found '{}'",
            path.display(),
            envelope.kind
        )));
    }
    Ok(envelope.payload)
}
