//! Reproducibility envelope written next to a trace file before the first
//! model call.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub limit: Option<usize>,
    pub config: RunConfig,
    pub checksums: Checksums,
    /// Unix seconds of the first invocation, then of each resume.
    pub started_at: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checksums {
    pub config_sha256: String,
    pub dataset_sha256: String,
    /// `data_sha256` from the index's meta.json; covers corpus and parameters.
    pub index_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_sha256: Option<String>,
}

pub fn version() -> String {
    match option_env!("TREERARE_GIT_DESCRIBE") {
        Some(d) => d.to_string(),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    /// Same inputs, ignoring when the runs happened.
    pub fn same_inputs(&self, other: &RunManifest) -> bool {
        self.dataset == other.dataset
            && self.method == other.method
            && self.seed == other.seed
            && self.limit == other.limit
            && self.checksums == other.checksums
    }

    pub fn read(path: &Path) -> anyhow::Result<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let raw = std::fs::read_to_string(path)?;
        Ok(Some(serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?))
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
