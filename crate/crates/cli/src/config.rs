//! Experiment configuration: JSON file plus flag overrides.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Conservation,
    Breakdown,
    Diagnostics,
    OracleSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub grid_n: usize,
    pub grid_half_width: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r_list: Vec<f64>,
    pub t_final: f64,
    /// `None` lets the solver pick its own step.
    pub dt: Option<f64>,
    pub snapshot_interval: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            grid_n: 1024,
            grid_half_width: 48.0,
            epsilon: 0.5,
            alpha: 0.5,
            beta: 1.5,
            r_list: vec![1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            t_final: match scenario {
                Scenario::Breakdown => 0.65,
                Scenario::Conservation => 0.5,
                _ => 0.25,
            },
            dt: None,
            snapshot_interval: 0.01,
            seed: 7,
        }
    }

    /// The CI-scale profile: coarse grid, short horizon, shallow radii.
    pub fn apply_quick(&mut self) {
        self.grid_n = 256;
        self.t_final = 0.1;
        self.r_list = vec![1e-3, 1e-4, 1e-5];
        self.snapshot_interval = 0.01;
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.grid_n.is_power_of_two() || self.grid_n < 64 {
            bail!("grid_n {} must be a power of two >= 64", self.grid_n);
        }
        if !(self.grid_half_width > 24.0) {
            bail!("grid_half_width {} too small for the block pattern", self.grid_half_width);
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bail!("epsilon {} must lie in (0, 1)", self.epsilon);
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha {} must lie in (0, 1)", self.alpha);
        }
        if !(self.beta > 1.0 && self.beta < 2.0) {
            bail!("beta {} must lie in (1, 2)", self.beta);
        }
        if !(self.t_final > 0.0 && self.t_final <= 1.0) {
            bail!("t_final {} must lie in (0, 1]", self.t_final);
        }
        if self.r_list.is_empty() || self.r_list.iter().any(|&r| !(r > 0.0 && r < 0.1)) {
            bail!("r_list must hold radii in (0, 0.1)");
        }
        Ok(())
    }

    /// Hex digest over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::defaults(Scenario::Breakdown);
        let path = dir.path().join("cfg.json");
        cfg.save(&path).unwrap();
        let back = ExperimentConfig::load(&path).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut cfg = ExperimentConfig::defaults(Scenario::Conservation);
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(Scenario::Breakdown);
        cfg.beta = 2.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(Scenario::Breakdown);
        cfg.grid_n = 100;
        assert!(cfg.validate().is_err());
    }
}
