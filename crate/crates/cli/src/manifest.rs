//! Run manifests: every stage records the content digests of its inputs and
//! outputs so cross-stage consistency is machine-checked instead of trusted.

use crate::error::AppError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub created_at_unix: u64,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: BTreeMap<String, FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String, AppError> {
    let bytes = std::fs::read(path).map_err(|e| {
        AppError::missing_upstream(format!("cannot read {}: {e}", path.display()))
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Manifest {
        let created_at_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_at_unix,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<(), AppError> {
        let sha256 = sha256_file(path)?;
        self.inputs
            .insert(name.to_string(), FileDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn add_output(&mut self, name: &str, path: &Path) -> Result<(), AppError> {
        let sha256 = sha256_file(path)?;
        self.outputs
            .insert(name.to_string(), FileDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), AppError> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)
            .map_err(|e| AppError::config(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read(dir: &Path) -> Result<Manifest, AppError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            AppError::missing_upstream(format!(
                "no manifest at {} (run the upstream stage first): {e}",
                path.display()
            ))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::config(format!("manifest {}: {e}", path.display())))
    }

    /// Checks that a file this stage consumes still matches the digest the
    /// upstream stage recorded for it.
    pub fn verify_output_unchanged(&self, name: &str, path: &Path) -> Result<(), AppError> {
        let recorded = self.outputs.get(name).ok_or_else(|| {
            AppError::missing_upstream(format!(
                "upstream manifest records no output named {name:?}"
            ))
        })?;
        let actual = sha256_file(path)?;
        if actual != recorded.sha256 {
            return Err(AppError::digest_mismatch(format!(
                "{} changed since the upstream stage ran (expected {}, found {actual})",
                path.display(),
                recorded.sha256
            )));
        }
        Ok(())
    }

    /// A config value recorded by the stage that wrote this manifest.
    pub fn config_str(&self, key: &str) -> Option<&str> {
        self.config.get(key).and_then(|v| v.as_str())
    }

    pub fn config_f64(&self, key: &str) -> Option<f64> {
        self.config.get(key).and_then(|v| v.as_f64())
    }
}

/// Requires a file to exist before a stage starts.
pub fn require_file(path: &Path, what: &str) -> Result<(), AppError> {
    if !path.is_file() {
        return Err(AppError::missing_upstream(format!(
            "{what} not found at {} (run the upstream stage first)",
            path.display()
        )));
    }
    Ok(())
}
