//! Run configuration files: one JSON document covering every tunable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::domain::{Hyperparams, LabelSpace, MarginTable, Preset};
use crate::error::{Error, Result};
use crate::model::{FeaturizerConfig, ModelConfig};
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub eval_corpus: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub entity_pool: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub knn_k: usize,
    pub histogram_bins: usize,
    pub max_pairs: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            knn_k: 5,
            histogram_bins: 50,
            max_pairs: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub label_space: LabelSpace,
    pub margins: MarginTable,
    pub hyperparams: Hyperparams,
    pub featurizer: FeaturizerConfig,
    pub model: ModelConfig,
    pub augment: AugmentConfig,
    pub eval: EvalSettings,
    pub paths: Paths,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label_space: LabelSpace::massive_default(),
            margins: MarginTable::default(),
            hyperparams: Hyperparams::default(),
            featurizer: FeaturizerConfig::default(),
            model: ModelConfig::default(),
            augment: AugmentConfig::default(),
            eval: EvalSettings::default(),
            paths: Paths::default(),
            preset: None,
            threads: 1,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Checks every section; margins are checked against the label space.
    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        self.featurizer.validate()?;
        self.model.validate()?;
        self.augment.validate()?;
        self.margins.validate_against(&self.label_space)?;
        if self.threads == 0 {
            return Err(Error::Validation("threads must be at least 1".into()));
        }
        if self.eval.knn_k == 0 || self.eval.histogram_bins == 0 {
            return Err(Error::Validation("knn_k and histogram_bins must be positive".into()));
        }
        Ok(())
    }

    /// Applies the stored preset, if any, to the hyperparameters.
    pub fn resolve_preset(&mut self) {
        if let Some(p) = self.preset {
            self.hyperparams.apply_preset(p);
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hyperparams: self.hyperparams.clone(),
            margins: self.margins.clone(),
            augment: self.augment.clone(),
            featurizer: self.featurizer.clone(),
            model: self.model,
            threads: self.threads,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_document_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"hyperparams": {"epochs": 2}, "threads": 2}"#).unwrap();
        assert_eq!(c.hyperparams.epochs, 2);
        assert_eq!(c.hyperparams.temperature, 0.07);
        assert_eq!(c.threads, 2);
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"hyperparams": {"epoch": 2}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn margins_must_match_label_space() {
        let c: RunConfig = serde_json::from_str(r#"{"label_space": {"in_domain": ["en", "de"]}}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
