//! One configuration file for the whole pipeline.
//!
//! The file is TOML with one table per pipeline stage; every key has a
//! default, so an empty file (or no file at all) reproduces the built-in
//! configuration, and any subset of keys may be overridden.  Unknown keys
//! are rejected everywhere so typos fail loudly instead of silently running
//! with defaults.  `config.example.toml` at the repository root lists every
//! key with its default value and a comment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use psr_core::dataset::DatasetGenConfig;
use psr_core::model::ModelConfig;
use psr_core::occupancy::OccupancyTrainConfig;
use psr_core::surrogate::SurrogateConfig;
use psr_core::training::TrainConfig;
use psr_planner::{MppiConfig, NavigationConfig};

use crate::error::{CliError, Result};

/// Every stage's constants in one file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalConfig {
    /// Simulated robot dynamics and measurement noise.
    pub surrogate: SurrogateConfig,
    /// Dataset generation: trajectory lengths and windowing.
    pub dataset: DatasetGenConfig,
    /// Model dimensions.
    pub model: ModelConfig,
    /// Predictor training loop.
    pub training: TrainConfig,
    /// Occupancy network training.
    pub occupancy: OccupancyTrainConfig,
    /// Sampling planner constants.
    pub mppi: MppiConfig,
    /// Closed-loop episode constants.
    pub navigation: NavigationConfig,
}

impl GlobalConfig {
    /// Parses a config from TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    /// Loads a config file, or returns the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(GlobalConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Io(format!("config file {}: {e}", p.display()))
                })?;
                Self::from_toml(&text)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_reproduces_the_defaults() {
        let cfg = GlobalConfig::from_toml("").unwrap();
        let def = GlobalConfig::default();
        assert_eq!(cfg.model.state_dim, def.model.state_dim);
        assert_eq!(cfg.training.epochs, def.training.epochs);
        assert_eq!(cfg.mppi.samples, def.mppi.samples);
        assert_eq!(cfg.dataset.horizon, def.dataset.horizon);
    }

    #[test]
    fn partial_overrides_keep_other_defaults() {
        let cfg = GlobalConfig::from_toml(
            "[model]\nstate_dim = 16\n\n[mppi]\nsamples = 5\n[training.adam]\nlearning_rate = 0.01\n",
        )
        .unwrap();
        assert_eq!(cfg.model.state_dim, 16);
        assert_eq!(cfg.mppi.samples, 5);
        assert!((cfg.training.adam.learning_rate - 0.01).abs() < 1e-15);
        // Untouched keys keep their defaults.
        assert_eq!(cfg.training.epochs, GlobalConfig::default().training.epochs);
        assert!((cfg.mppi.temperature - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        assert!(matches!(
            GlobalConfig::from_toml("[planner]\nsamples = 3\n"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            GlobalConfig::from_toml("[mppi]\nnum_samples = 3\n"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            GlobalConfig::from_toml("[training.adam]\nlr = 0.1\n"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = toml::to_string_pretty(&GlobalConfig::default()).unwrap();
        let back = GlobalConfig::from_toml(&text).unwrap();
        assert_eq!(back.model.state_dim, GlobalConfig::default().model.state_dim);
        assert_eq!(back.occupancy.hidden, GlobalConfig::default().occupancy.hidden);
    }

    #[test]
    fn the_example_config_file_matches_the_defaults() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../config.example.toml");
        let text = std::fs::read_to_string(path).unwrap();
        let example: toml::Value = toml::from_str(&text).unwrap();
        let defaults: toml::Value =
            toml::from_str(&toml::to_string(&GlobalConfig::default()).unwrap()).unwrap();
        assert_eq!(example, defaults, "config.example.toml drifted from built-in defaults");
        // And it parses through the strict loader.
        GlobalConfig::from_toml(&text).unwrap();
    }

    #[test]
    fn missing_file_is_an_io_error_and_no_file_is_defaults() {
        assert!(matches!(
            GlobalConfig::load(Some(Path::new("/nonexistent/psr.toml"))),
            Err(CliError::Io(_))
        ));
        assert!(GlobalConfig::load(None).is_ok());
    }
}
