//! Record of one command run.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the canonical configuration and the input file bytes.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

pub fn config_hash(canonical_config: &str, inputs: &[&Path]) -> std::io::Result<String> {
    let mut h = Sha256::new();
    h.update(canonical_config.as_bytes());
    for p in inputs {
        h.update([0u8]);
        h.update(std::fs::read(p)?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config_hash,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }
}
