use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

/// Provenance record written next to every set of outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of the canonical config text below.
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn digest(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, started_unix: u64) -> Self {
        let canonical = serde_json::to_string(&config).expect("json value serialises");
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: digest(&canonical),
            config,
            started_unix,
            finished_unix: started_unix,
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write(mut self, dir: &Path) -> anyhow::Result<()> {
        self.finished_unix = now();
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// Creates `path` inside `dir`, recording its name.
pub fn create(dir: &Path, name: &str, outputs: &mut Vec<PathBuf>) -> anyhow::Result<fs::File> {
    let path = dir.join(name);
    outputs.push(PathBuf::from(name));
    fs::File::create(&path).with_context(|| format!("creating {}", path.display()))
}
