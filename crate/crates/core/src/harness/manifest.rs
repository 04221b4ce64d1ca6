use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// A written file, relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn record(dir: &Path, name: &str) -> Result<Self> {
        Ok(Artifact {
            path: name.to_owned(),
            sha256: file_digest(&dir.join(name))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialArtifacts {
    pub trial: u32,
    pub seed: u64,
    pub episodes_run: usize,
    pub stopped_early: bool,
    pub checkpoint: Artifact,
    pub curve: Artifact,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    /// `saricos` or `er`.
    pub mode: String,
    pub scenario: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub root_seed: u64,
    pub trials: Vec<TrialArtifacts>,
    pub metrics: Artifact,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Schema {
                found,
                expected: MANIFEST_SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &Artifact> {
        self.trials
            .iter()
            .flat_map(|t| [&t.checkpoint, &t.curve])
            .chain(std::iter::once(&self.metrics))
    }

    /// Recompute the config hash and every artifact digest against `dir`.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let hash = self.config.hash()?;
        if hash != self.config_hash {
            return Err(Error::Contract(format!(
                "config hash {} does not match recorded {}",
                hash, self.config_hash
            )));
        }
        for a in self.artifacts() {
            let digest = file_digest(&dir.join(&a.path))?;
            if digest != a.sha256 {
                return Err(Error::Contract(format!("artifact {} changed since the run", a.path)));
            }
        }
        Ok(())
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

pub(crate) fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
