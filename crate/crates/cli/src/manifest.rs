//! Run manifests: enough to repeat a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::settings::Settings;

pub const MANIFEST_SCHEMA: &str = "queso-manifest/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub version: String,
    /// Fully resolved settings, defaults included.
    pub settings: Settings,
    pub inputs: Vec<PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn new(command: &str, settings: Settings, inputs: Vec<PathBuf>) -> Self {
        Manifest {
            schema: MANIFEST_SCHEMA.to_string(),
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            settings,
            inputs,
            outputs: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("malformed manifest {}", path.display()))?;
        anyhow::ensure!(
            m.schema == MANIFEST_SCHEMA,
            "unsupported manifest schema '{}'",
            m.schema
        );
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}

/// `rules.txt` -> `rules.txt.manifest.json`.
pub fn default_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
