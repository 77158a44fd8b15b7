//! Orchestrator configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Dot,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestratorConfig {
    /// Capability server endpoints, `tcp://host:port` or `stdio:<command>`.
    pub servers: Vec<String>,
    /// The directory endpoint.
    pub directory: String,
    #[serde(default)]
    pub output_format: OutputFormat,
    /// Directory stdio commands run from; the config file's directory.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl OrchestratorConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if cfg.servers.is_empty() {
            return Err("at least one server endpoint is required".into());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut cfg = Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.base_dir = path.parent().map(|p| {
            if p.as_os_str().is_empty() {
                PathBuf::from(".")
            } else {
                p.to_path_buf()
            }
        });
        Ok(cfg)
    }
}
