use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model and training hyperparameters. Defaults follow the published
/// setup where it states a value; learning rate and epochs are placeholders
/// to tune on dev data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bilstm_hidden: usize,
    pub type_embedding_dim: usize,
    pub feature_embedding_dim: usize,
    pub fc_sizes: Vec<usize>,
    pub dropout: f64,
    pub max_antecedents: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub keep_singletons: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bilstm_hidden: 200,
            type_embedding_dim: 20,
            feature_embedding_dim: 20,
            fc_sizes: vec![150, 150],
            dropout: 0.2,
            max_antecedents: 50,
            learning_rate: 1e-3,
            epochs: 20,
            seed: 0,
            keep_singletons: true,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("bilstm_hidden", self.bilstm_hidden),
            ("type_embedding_dim", self.type_embedding_dim),
            ("feature_embedding_dim", self.feature_embedding_dim),
            ("max_antecedents", self.max_antecedents),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("config: {name} must be positive")));
        }
        if self.fc_sizes.is_empty() || self.fc_sizes.contains(&0) {
            return Err(Error::invalid("config: fc_sizes must be non-empty and positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("config: dropout must be in [0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("config: learning_rate must be positive"));
        }
        Ok(())
    }

    /// Reads `key = value` pairs; missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Settings for the marker-based type classifier and its cross-validation.
/// Only the head is trained, so the default step is larger than the
/// coreference model's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypePredConfig {
    pub folds: usize,
    pub epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dev_fraction: f64,
    pub seed: u64,
}

impl Default for TypePredConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            epochs: 20,
            patience: 10,
            learning_rate: 1e-2,
            batch_size: 32,
            dev_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TypePredConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("type prediction needs at least 2 folds"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("type prediction: batch_size and epochs must be positive"));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return Err(Error::invalid("type prediction: dev_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}
