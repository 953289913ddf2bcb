//! Run configuration: defaults, named presets, TOML config files, and
//! command-line overrides, layered in that order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LossVariant;
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("unknown preset {0:?}; known presets: {}", preset_names().join(", "))]
    UnknownPreset(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub seed: u64,

    /// Maximum walk length L (entities beyond the start).
    pub max_walk_length: usize,
    /// Number of walk attempts n.
    pub walk_attempts: u64,
    /// Confidence threshold tau for the augmented set.
    pub tau: f64,

    pub d: usize,
    pub d_hat: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub neg_ratio: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub valid_every: usize,
    pub variant: LossVariant,
    pub use_high: bool,
    pub use_aug: bool,
    pub reg_w: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: None,
            seed: 0,
            max_walk_length: 3,
            walk_attempts: 1_000_000,
            tau: 0.7,
            d: 200,
            d_hat: 200,
            alpha: 0.1,
            beta: 0.01,
            lambda1: 1.0,
            lambda2: 0.2,
            neg_ratio: 10,
            epochs: 500,
            batch_size: 512,
            valid_every: 50,
            variant: LossVariant::Separate,
            use_high: true,
            use_aug: true,
            reg_w: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError::Invalid(m.into()));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return err("tau must be in (0, 1]");
        }
        if self.max_walk_length < 2 {
            return err("max_walk_length must be at least 2");
        }
        if self.d == 0 || self.d_hat == 0 {
            return err("d and d_hat must be positive");
        }
        if self.alpha <= 0.0 {
            return err("alpha must be positive");
        }
        if self.beta < 0.0 || self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return err("beta, lambda1, lambda2 must be non-negative");
        }
        if self.batch_size == 0 {
            return err("batch_size must be positive");
        }
        Ok(())
    }

    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            beta: self.beta,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            neg_ratio: self.neg_ratio,
            epochs: self.epochs,
            batch_size: self.batch_size,
            valid_every: self.valid_every,
            seed: self.seed,
            d: self.d,
            d_hat: self.d_hat,
            variant: self.variant,
            use_high: self.use_high,
            use_aug: self.use_aug,
            reg_w: self.reg_w,
        }
    }

    pub fn apply(&mut self, patch: &ConfigPatch) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &patch.$field { self.$field = v.clone(); })*
            };
        }
        set!(
            seed, max_walk_length, walk_attempts, tau, d, d_hat, alpha, beta,
            lambda1, lambda2, neg_ratio, epochs, batch_size, valid_every, variant,
            use_high, use_aug, reg_w
        );
        if patch.data_dir.is_some() {
            self.data_dir = patch.data_dir.clone();
        }
    }
}

/// Partial configuration: every field optional, unknown keys rejected.
/// Used for both TOML config files and command-line overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub data_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_walk_length: Option<usize>,
    pub walk_attempts: Option<u64>,
    pub tau: Option<f64>,
    pub d: Option<usize>,
    pub d_hat: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub neg_ratio: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub valid_every: Option<usize>,
    pub variant: Option<LossVariant>,
    pub use_high: Option<bool>,
    pub use_aug: Option<bool>,
    pub reg_w: Option<bool>,
}

pub fn load_patch(path: &Path) -> Result<ConfigPatch, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_owned(),
        source: e,
    })
}

/// Tuned hyperparameters per dataset and target task. Naming:
/// `<dataset>-q-<task>` where `q` marks the quaternion backbone, with
/// datasets `fbh` (FB15K237 with homogeneous higher
/// triples), `fbhe` (FB15K237 with heterogeneous higher triples), `dbhe`
/// (DB15K with heterogeneous higher triples), and tasks `tp` (triplet
/// prediction), `clp` (conditional link prediction), `blp` (base-level link
/// prediction).
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

type PresetRow = (&'static str, f64, f64, f64, f64);

// (name, alpha, beta, lambda1, lambda2)
const PRESETS: &[PresetRow] = &[
    ("fbh-q-tp", 0.1, 0.01, 0.5, 1.0),
    ("fbh-q-clp", 0.1, 0.01, 1.0, 0.2),
    ("fbh-q-blp", 0.1, 0.05, 1.0, 0.2),
    ("fbhe-q-tp", 0.1, 0.01, 1.0, 0.2),
    ("fbhe-q-clp", 0.1, 0.01, 1.0, 0.2),
    ("fbhe-q-blp", 0.1, 0.05, 0.5, 0.2),
    ("dbhe-q-tp", 0.5, 0.05, 0.2, 1.0),
    ("dbhe-q-clp", 0.5, 0.01, 1.0, 0.2),
    ("dbhe-q-blp", 0.5, 0.1, 0.5, 0.2),
];

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let row = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .ok_or_else(|| ConfigError::UnknownPreset(name.into()))?;
    Ok(RunConfig {
        alpha: row.1,
        beta: row.2,
        lambda1: row.3,
        lambda2: row.4,
        ..RunConfig::default()
    })
}

/// The full-scale reference configuration used for published-benchmark runs.
/// Deliberately outside any test budget: hundreds of epochs at d = 200 with
/// a large walk sample.
pub fn full_scale_reference(name: &str) -> Result<RunConfig, ConfigError> {
    Ok(RunConfig {
        walk_attempts: 50_000_000,
        ..preset(name)?
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_in_patch_is_rejected() {
        let err = toml::from_str::<ConfigPatch>("learning_rate = 0.1").unwrap_err();
        assert!(err.to_string().contains("learning_rate"));
    }

    #[test]
    fn patch_overrides_only_present_fields() {
        let mut cfg = RunConfig::default();
        let patch: ConfigPatch = toml::from_str("alpha = 0.5\nepochs = 10").unwrap();
        cfg.apply(&patch);
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.epochs, 10);
        assert_eq!(cfg.beta, RunConfig::default().beta);
    }

    #[test]
    fn every_preset_exists_and_validates() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.d, 200);
            assert_eq!(cfg.d_hat, 200);
        }
        assert_eq!(preset_names().len(), 9);
    }

    #[test]
    fn preset_hyperparameters_spot_checks() {
        let c = preset("fbh-q-tp").unwrap();
        assert_eq!((c.alpha, c.beta, c.lambda1, c.lambda2), (0.1, 0.01, 0.5, 1.0));
        let c = preset("dbhe-q-blp").unwrap();
        assert_eq!((c.alpha, c.beta, c.lambda1, c.lambda2), (0.5, 0.1, 0.5, 0.2));
        let c = preset("fbhe-q-clp").unwrap();
        assert_eq!((c.alpha, c.beta, c.lambda1, c.lambda2), (0.1, 0.01, 1.0, 0.2));
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(preset("nope"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = |cfg: RunConfig| cfg.validate().is_err();
        assert!(bad(RunConfig { tau: 0.0, ..RunConfig::default() }));
        assert!(bad(RunConfig { tau: 1.5, ..RunConfig::default() }));
        assert!(bad(RunConfig { max_walk_length: 1, ..RunConfig::default() }));
        assert!(bad(RunConfig { d: 0, ..RunConfig::default() }));
    }

    #[test]
    fn full_scale_reference_uses_large_walk_sample() {
        let cfg = full_scale_reference("fbh-q-tp").unwrap();
        assert_eq!(cfg.walk_attempts, 50_000_000);
        assert_eq!(cfg.epochs, 500);
    }
}
