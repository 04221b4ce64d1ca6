use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureSpec, InterSkillParams, RadFeatureSpec, RadParams, TwoTieredPolicy};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Where a checkpoint's randomness came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub root_seed: u64,
    pub trial: u32,
    pub trial_seed: u64,
}

/// Versioned JSON document holding a complete two-tiered policy.
///
/// Floats are written in shortest round-trip form, so `save -> load -> save`
/// reproduces the file byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    /// Objective the parameters were trained for (`saricos` or `er`).
    pub mode: String,
    pub skills: Vec<String>,
    pub state_dim: usize,
    pub alpha: Matrix,
    pub omega: Matrix,
    pub variance: f64,
    pub rap_clamp: (f64, f64),
    pub features: FeatureSpec,
    pub rad_features: RadFeatureSpec,
    pub lineage: SeedLineage,
}

impl Checkpoint {
    pub fn from_policy(policy: &TwoTieredPolicy, mode: &str, lineage: SeedLineage) -> Self {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            mode: mode.to_owned(),
            skills: policy.skills.clone(),
            state_dim: policy.state_dim,
            alpha: policy.inter.alpha.clone(),
            omega: policy.rad.omega.clone(),
            variance: policy.rad.variance,
            rap_clamp: policy.rap_clamp,
            features: policy.features.clone(),
            rad_features: policy.rad_features.clone(),
            lineage,
        }
    }

    pub fn to_policy(&self) -> Result<TwoTieredPolicy> {
        TwoTieredPolicy::new(
            InterSkillParams {
                alpha: self.alpha.clone(),
            },
            RadParams {
                omega: self.omega.clone(),
                variance: self.variance,
            },
            self.features.clone(),
            self.rad_features.clone(),
            self.rap_clamp,
            self.skills.clone(),
            self.state_dim,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Schema {
                found,
                expected: CHECKPOINT_SCHEMA_VERSION,
            });
        }
        let checkpoint: Checkpoint = serde_json::from_value(value)?;
        checkpoint.to_policy()?;
        Ok(checkpoint)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)
    }
}
