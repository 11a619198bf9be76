//! JSON checkpoint format: a header with dimensions and vocabularies, then
//! every tensor with its shape. Values are written with shortest round-trip
//! formatting, so a save/load cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InferenceSpec, Model, ModelConfig, Params, Tensor, TENSOR_NAMES};
use crate::error::{Error, Result};
use crate::io;
use crate::question::{Vocab, PAD, UNK};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "qbias-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub vocab: Vec<String>,
    pub answers: Vec<String>,
    #[serde(default)]
    pub inference: InferenceSpec,
    pub tensors: Vec<TensorRecord>,
}

impl<T: Scalar> Model<T> {
    pub fn to_checkpoint(&self) -> CheckpointFile {
        CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.surfaces().to_vec(),
            answers: self.answers.clone(),
            inference: self.inference.clone(),
            tensors: self
                .params
                .tensors()
                .iter()
                .map(|(name, t)| TensorRecord {
                    name: name.to_string(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|x| x.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(file: CheckpointFile) -> Result<Self> {
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::Model(format!(
                "unsupported checkpoint {} v{}",
                file.format, file.version
            )));
        }
        if file.vocab.len() != file.config.vocab_size
            || file.answers.len() != file.config.num_answers
            || file.vocab.first().map(String::as_str) != Some(PAD)
            || file.vocab.get(1).map(String::as_str) != Some(UNK)
        {
            return Err(Error::Model("checkpoint vocabulary does not match its header".into()));
        }
        let mut params = Params::zeros(&file.config);
        let mut seen = 0;
        for (name, slot) in params.tensors_mut() {
            let rec = file
                .tensors
                .iter()
                .find(|r| r.name == name)
                .ok_or_else(|| Error::Model(format!("checkpoint lacks tensor {name}")))?;
            if rec.shape != slot.shape || rec.data.len() != slot.len() {
                return Err(Error::Model(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    rec.shape, slot.shape
                )));
            }
            *slot = Tensor {
                shape: rec.shape.clone(),
                data: rec.data.iter().map(|&x| T::lit(x)).collect(),
            };
            seen += 1;
        }
        debug_assert_eq!(seen, TENSOR_NAMES.len());
        Ok(Self {
            config: file.config,
            vocab: Vocab::from_surfaces(file.vocab.iter().skip(2)),
            answers: file.answers,
            inference: file.inference,
            params,
        })
    }

    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec(&self.to_checkpoint()).expect("checkpoint serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, &self.checkpoint_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(io::read_json(path)?)
    }
}
