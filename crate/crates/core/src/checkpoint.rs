//! JSON checkpoints: model config, named parameters and optimizer state.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, Moments, Tensor};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Rgn};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorData {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentData {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub moments: BTreeMap<String, MomentData>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub params: BTreeMap<String, TensorData>,
    pub adam: AdamState,
}

impl Checkpoint {
    pub fn from_model(model: &Rgn, adam: &AdamConfig) -> Self {
        let store = model.store();
        let mut params = BTreeMap::new();
        let mut moments = BTreeMap::new();
        for id in store.ids() {
            let name = store.name(id).to_string();
            let v = store.value(id);
            params.insert(
                name.clone(),
                TensorData {
                    shape: v.shape().to_vec(),
                    data: v.data().to_vec(),
                },
            );
            let m = store.moments(id);
            moments.insert(
                name,
                MomentData {
                    m: m.m.clone(),
                    v: m.v.clone(),
                },
            );
        }
        Self {
            format_version: FORMAT_VERSION,
            config: model.config().clone(),
            params,
            adam: AdamState {
                step: store.step_count(),
                beta1: adam.beta1,
                beta2: adam.beta2,
                epsilon: adam.eps,
                moments,
            },
        }
    }

    /// Rebuild the model, checking every parameter name and shape against the config.
    pub fn to_model(&self) -> Result<(Rgn, AdamConfig)> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let mut model = Rgn::zeroed(self.config.clone())?;
        let store = model.store_mut();
        let ids: Vec<_> = store.ids().collect();
        if ids.len() != self.params.len() {
            let extra: Vec<_> = self
                .params
                .keys()
                .filter(|k| store.id(k).is_err())
                .cloned()
                .collect();
            return Err(Error::Checkpoint(format!(
                "config expects {} parameters, checkpoint has {} (unexpected: {extra:?})",
                ids.len(),
                self.params.len()
            )));
        }
        for id in ids {
            let name = store.name(id).to_string();
            let t = self
                .params
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if t.shape != store.value(id).shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, config expects {:?}",
                    t.shape,
                    store.value(id).shape()
                )));
            }
            store.set_value(id, Tensor::new(t.shape.clone(), t.data.clone())?)?;
            if let Some(m) = self.adam.moments.get(&name) {
                store.set_moments(
                    id,
                    Moments {
                        m: m.m.clone(),
                        v: m.v.clone(),
                    },
                )?;
            }
        }
        store.set_step_count(self.adam.step);
        let adam = AdamConfig {
            beta1: self.adam.beta1,
            beta2: self.adam.beta2,
            eps: self.adam.epsilon,
        };
        Ok((model, adam))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
