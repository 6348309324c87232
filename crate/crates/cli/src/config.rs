//! Run configuration: built-in defaults, then a TOML file, then flags.

use geosynth::engine::GenerationConfig;
use geosynth::reasoner::ClientSettings;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsOptions {
    /// Q&A texts sampled for the diversity score.
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self { sample_size: 5000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub figures: u64,
    /// Catalog file; unset means the bundled catalog.
    pub catalog: Option<PathBuf>,
    /// Prompt asset directory; unset means the bundled pool.
    pub prompts: Option<PathBuf>,
    pub mock_client: bool,
    /// Mock fixture file (prompt hash to response).
    pub fixtures: Option<PathBuf>,
    pub dry_run: bool,
    pub generation: GenerationConfig,
    pub client: ClientSettings,
    pub stats: StatsOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            figures: 100,
            catalog: None,
            prompts: None,
            mock_client: false,
            fixtures: None,
            dry_run: false,
            generation: GenerationConfig::default(),
            client: ClientSettings::default(),
            stats: StatsOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// The merged configuration as recorded in manifests.
    pub fn effective(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}
