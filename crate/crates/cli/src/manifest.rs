use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{to_text, RunConfig};

/// Provenance written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical config text.
    pub config_digest: String,
    pub version: String,
    /// RFC 3339 start time.
    pub started: String,
    pub outputs: Vec<String>,
}

pub fn config_digest(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(to_text(config).as_bytes()))
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, started: chrono::DateTime<chrono::Utc>) -> Self {
        Self {
            command: command.to_string(),
            config_digest: config_digest(config),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: started.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
