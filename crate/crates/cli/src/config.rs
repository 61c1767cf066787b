use std::path::Path;

use anyhow::{Context, Result};
use dprl::harness::{BoundGrid, ExperimentConfig};
use serde::{Deserialize, Serialize};

/// Top-level run configuration. Unknown keys are rejected at every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub bounds: Option<BoundGrid>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.experiment.validate().with_context(|| format!("validating config {}", path.display()))?;
        Ok(config)
    }
}
