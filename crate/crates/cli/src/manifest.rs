//! Run manifests and the artifact index.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::layout::Layout;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Option<String>,
    pub config_hash: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    /// Paths relative to the artifact root when inside it.
    pub artifacts: Vec<String>,
    pub started_unix: u64,
    pub wall_clock_secs: f64,
    pub deterministic: bool,
    pub jobs: usize,
    pub versions: BTreeMap<String, String>,
    /// Fully resolved configuration plus fixed method choices.
    #[serde(default)]
    pub settings: serde_json::Value,
}

pub fn versions() -> BTreeMap<String, String> {
    [
        ("toxens".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("manifest_format".to_string(), "1".to_string()),
    ]
    .into_iter()
    .collect()
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Artifact → manifest file name.
pub fn read_index(layout: &Layout) -> Result<BTreeMap<String, String>, CliError> {
    let p = layout.index();
    if !p.exists() {
        return Ok(BTreeMap::new());
    }
    let text = std::fs::read_to_string(&p).map_err(|e| io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| io(&p, e))
}

/// Writes `manifests/<command>-<seq>.json` and points each artifact at it.
pub fn write(layout: &Layout, m: &RunManifest) -> Result<PathBuf, CliError> {
    let dir = layout.manifests();
    std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    let seq = std::fs::read_dir(&dir)
        .map_err(|e| io(&dir, e))?
        .flatten()
        .filter(|e| e.file_name() != "index.json")
        .count();
    let name = format!("{:04}-{}.json", seq, m.command.replace(' ', "-"));
    let path = dir.join(&name);
    std::fs::write(&path, serde_json::to_string_pretty(m).expect("manifest serializes")).map_err(|e| io(&path, e))?;
    let mut index = read_index(layout)?;
    for a in &m.artifacts {
        index.insert(a.clone(), name.clone());
    }
    let ip = layout.index();
    std::fs::write(&ip, serde_json::to_string_pretty(&index).expect("index serializes")).map_err(|e| io(&ip, e))?;
    Ok(path)
}
