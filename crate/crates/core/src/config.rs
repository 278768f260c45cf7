//! Run configuration file: one JSON object with nested sections.
//!
//! ```json
//! {"model": {"num_types": 2, "d_in": 32}, "train": {"epochs": 10, "seed": 7},
//!  "mc": {"samples": 10}, "data": {"train": "data/train.jsonl"}, "output_dir": "run"}
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::objectives::McConfig;
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: "data/train.jsonl".into(),
            val: "data/val.jsonl".into(),
            test: "data/test.jsonl".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub mc: McConfig,
    pub data: DataConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            mc: McConfig::default(),
            data: DataConfig::default(),
            output_dir: "run".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.mc.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"model": {"num_types": 3}, "train": {"seed": 7}}"#).unwrap();
        assert_eq!(c.model.num_types, 3);
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.train.epochs, 50);
        assert_eq!(c.mc.samples, 10);
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        for text in [
            r#"{"modle": {}}"#,
            r#"{"model": {"heads": 2}}"#,
            r#"{"train": {"learning_rate": 0.1}}"#,
            r#"{"mc": {"n": 3}}"#,
            r#"{"data": {"dev": "x"}}"#,
        ] {
            assert!(serde_json::from_str::<RunConfig>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
