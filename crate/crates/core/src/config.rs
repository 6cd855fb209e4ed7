//! Pipeline configuration: one JSON document covering every tunable.
//!
//! Flags given on the command line override file values; the resolved
//! config can be printed for provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envmap::LightingConfig;
use crate::error::{Error, Result};
use crate::ground::HorizontalConfig;
use crate::insertion::InsertionConfig;
use crate::plane::PlaneExtractionConfig;
use crate::strategy::{create_placement, PolicyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub plane: PlaneExtractionConfig,
    pub ground: HorizontalConfig,
    pub insertion: InsertionConfig,
    pub lighting: LightingConfig,
    /// Placement strategy name; see the strategy registry.
    pub placement: String,
    pub policy: PolicyConfig,
    /// Master seed; batch commands require it here or as a flag.
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            plane: PlaneExtractionConfig::default(),
            ground: HorizontalConfig::default(),
            insertion: InsertionConfig::default(),
            lighting: LightingConfig::default(),
            placement: "constrained".to_string(),
            policy: PolicyConfig::default(),
            seed: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.plane.validate()?;
        self.ground.validate()?;
        self.insertion.validate()?;
        self.lighting.validate()?;
        create_placement(&self.placement)?;
        self.policy.validate()?;
        Ok(())
    }
}

/// Loads and validates a config file; unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let cfg: PipelineConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}
