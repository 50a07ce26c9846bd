//! Run manifest: what produced this output directory and whether it finished.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub command: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    /// "incomplete" while running, "complete" after finalize.
    pub status: String,
    /// Paths relative to the manifest's directory; all exist on completion.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    /// Write an incomplete manifest before the run starts.
    pub fn start(dir: &Path, command: &str, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output dir {}", dir.display()))?;
        let manifest = RunManifest {
            config_hash: config_hash.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: None,
            status: "incomplete".to_string(),
            artifacts: Vec::new(),
        };
        manifest.write(dir)?;
        Ok(manifest)
    }

    /// Mark complete; every artifact must exist.
    pub fn finalize(mut self, dir: &Path, artifacts: Vec<String>) -> Result<()> {
        for rel in &artifacts {
            let p = dir.join(rel);
            if !p.exists() {
                bail!("manifest artifact missing: {}", p.display());
            }
        }
        self.artifacts = artifacts;
        self.finished_at = Some(chrono::Utc::now().to_rfc3339());
        self.status = "complete".to_string();
        self.write(dir)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }
}
