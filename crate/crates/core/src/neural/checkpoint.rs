//! Model checkpoint file.
//!
//! JSON object with `version`, `config`, `fingerprint`, the vocabulary names,
//! `event_weights`, and `tensors`: a list of `{name, shape, data}` where
//! `data` is the row-major flattening of an array of the declared shape.
//! Tensor names and order are fixed (see [`BLOCK_NAMES`]):
//!
//! | name       | shape            |
//! |------------|------------------|
//! | `enc_w`    | `4H × (|E| + H)` |
//! | `enc_b`    | `4H`             |
//! | `dec_w`    | `4H × (M_z + H)` |
//! | `dec_b`    | `4H`             |
//! | `mu_w`     | `M_z × H`        |
//! | `mu_b`     | `M_z`            |
//! | `logvar_w` | `M_z × H`        |
//! | `logvar_b` | `M_z`            |
//! | `out_w`    | `|E| × H`        |
//! | `out_b`    | `|E|`            |
//!
//! LSTM gate rows are stacked input, forget, cell, output; columns are the
//! step input followed by the previous hidden state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::train::TrainingLog;
use super::vae::{ModelConfig, ModelParams, Weights, BLOCK_NAMES};
use crate::data::Vocabulary;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub fingerprint: String,
    pub vocabulary: Vec<String>,
    pub event_weights: Vec<f64>,
    pub tensors: Vec<NamedTensor>,
    pub training_log: TrainingLog,
}

impl Checkpoint {
    pub fn new(model: &ModelParams, vocab: &Vocabulary, log: &TrainingLog) -> Result<Self> {
        check_fingerprint(model, vocab)?;
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            fingerprint: model.fingerprint.clone(),
            vocabulary: vocab.names().into_iter().map(String::from).collect(),
            event_weights: model.event_weights.clone(),
            tensors: model
                .weights
                .blocks()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name: name.to_string(),
                    shape: t.shape.clone(),
                    data: t.data.clone(),
                })
                .collect(),
            training_log: log.clone(),
        })
    }

    /// Rebuilds the model, validating version, names, and every shape.
    pub fn to_model(&self) -> Result<ModelParams> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let n_events = self.vocabulary.len();
        let hidden = self.config.hidden_size;
        let latent = self.config.latent_dim;
        let mut weights = Weights::zeros(n_events, hidden, latent);
        if self.tensors.len() != BLOCK_NAMES.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                BLOCK_NAMES.len(),
                self.tensors.len()
            )));
        }
        for ((name, slot), stored) in weights.blocks_mut().into_iter().zip(&self.tensors) {
            if stored.name != name {
                return Err(Error::Checkpoint(format!(
                    "expected tensor `{name}`, found `{}`",
                    stored.name
                )));
            }
            if stored.shape != slot.shape || stored.data.len() != slot.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?} ({} values), expected {:?}",
                    stored.shape,
                    stored.data.len(),
                    slot.shape
                )));
            }
            *slot = Tensor {
                shape: stored.shape.clone(),
                data: stored.data.clone(),
            };
        }
        if self.event_weights.len() != n_events {
            return Err(Error::Checkpoint(format!(
                "{} event weights for {n_events} event types",
                self.event_weights.len()
            )));
        }
        if let Some(block) = weights.first_non_finite() {
            return Err(Error::Checkpoint(format!("non-finite values in `{block}`")));
        }
        let vocab = Vocabulary::from_names(self.vocabulary.iter().cloned())?;
        if vocab.fingerprint() != self.fingerprint {
            return Err(Error::Checkpoint(
                "stored fingerprint does not match stored vocabulary".into(),
            ));
        }
        Ok(ModelParams {
            config: self.config.clone(),
            weights,
            event_weights: self.event_weights.clone(),
            fingerprint: self.fingerprint.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn check_fingerprint(model: &ModelParams, vocab: &Vocabulary) -> Result<()> {
    let fp = vocab.fingerprint();
    if fp != model.fingerprint || vocab.len() != model.n_events() {
        return Err(Error::Fingerprint {
            model: model.fingerprint.clone(),
            dataset: fp,
        });
    }
    Ok(())
}
