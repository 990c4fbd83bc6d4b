//! Run directories and report summaries.

use crate::config::ExperimentConfig;
use anyhow::Result;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Resolve the output root: flag, then VORTEXLAB_OUT, then ./runs.
pub fn out_root(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("VORTEXLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Create `root/<label>-<confighash>/`.
pub fn run_dir(root: &Path, label: &str, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = root.join(format!("{label}-{}", cfg.hash()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Provenance block embedded in every report.
#[derive(Debug, Serialize)]
pub struct Provenance {
    pub config: ExperimentConfig,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperbolicity_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sandwich_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_lipschitz_n: Option<f64>,
}

impl Provenance {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Provenance {
            config: cfg.clone(),
            config_hash: cfg.hash(),
            hyperbolicity_k: None,
            sandwich_m: None,
            log_lipschitz_n: None,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
