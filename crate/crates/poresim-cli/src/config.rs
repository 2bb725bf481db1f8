use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use poresim::{datapipe::CleanConfig, rfregress::ForestConfig, DetectionConfig};

/// Whole-pipeline configuration; every field has a sensible default, so a
/// config file may specify any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub detection: DetectionConfig,
    pub clean: CleanConfig,
    pub forest: ForestConfig,
    pub beta: f64,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            detection: DetectionConfig::default(),
            clean: CleanConfig::default(),
            forest: ForestConfig::default(),
            beta: poresim::deform::DEFAULT_BETA,
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<PipelineConfig> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: PipelineConfig = serde_json::from_slice(&bytes)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(PipelineConfig::default()),
        }
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        crate::report::write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.detection.validate()?;
        self.clean.validate()?;
        self.forest.validate()?;
        if !(self.beta >= 1.0) {
            anyhow::bail!("beta must be >= 1, got {}", self.beta);
        }
        Ok(())
    }

    /// Hash of the canonical JSON encoding; recorded in run reports so any
    /// output can be tied to the exact configuration that produced it.
    pub fn sha256(&self) -> anyhow::Result<String> {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self)?;
        let digest = Sha256::digest(&bytes);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
