//! JSON checkpoint for one encoder.
//!
//! Every float is written as its shortest round-trip decimal string, so a
//! save/load cycle reproduces each `f64` bit for bit.

use serde::{Deserialize, Serialize};

use super::config::EncoderConfig;
use super::network::EncoderState;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

pub const ENCODER_FORMAT_VERSION: u32 = 1;

/// Serde adapters writing floats as decimal strings.
pub(crate) mod exact {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn encode(v: f64) -> String {
        // Display for f64 is the shortest string that parses back to the same value.
        v.to_string()
    }

    pub fn decode(s: &str) -> Result<f64, String> {
        s.parse::<f64>().map_err(|e| format!("bad float {s:?}: {e}"))
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        decode(&s).map_err(D::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&encode(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let raw = Vec::<String>::deserialize(d)?;
            raw.iter()
                .map(|s| decode(s).map_err(D::Error::custom))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(with = "exact::vec")]
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchNormRecord {
    pub name: String,
    #[serde(with = "exact::vec")]
    pub running_mean: Vec<f64>,
    #[serde(with = "exact::vec")]
    pub running_var: Vec<f64>,
    #[serde(with = "exact")]
    pub momentum: f64,
    #[serde(with = "exact")]
    pub eps: f64,
    /// `null` when ghost batching is disabled.
    pub virtual_batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderCheckpoint {
    pub format_version: u32,
    pub config: EncoderConfig,
    pub tensors: Vec<TensorRecord>,
    pub batch_norms: Vec<BatchNormRecord>,
}

impl EncoderState {
    pub fn to_checkpoint(&self) -> EncoderCheckpoint {
        let tensors = self
            .store
            .iter()
            .zip(&self.names)
            .map(|(p, name)| TensorRecord {
                name: name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                data: p.value.data().to_vec(),
            })
            .collect();
        let batch_norms = self
            .bns
            .iter()
            .zip(&self.bn_names)
            .map(|(bn, name)| BatchNormRecord {
                name: name.clone(),
                running_mean: bn.running_mean.clone(),
                running_var: bn.running_var.clone(),
                momentum: bn.momentum,
                eps: bn.eps,
                virtual_batch_size: (bn.virtual_batch_size != usize::MAX)
                    .then_some(bn.virtual_batch_size),
            })
            .collect();
        EncoderCheckpoint {
            format_version: ENCODER_FORMAT_VERSION,
            config: self.config.clone(),
            tensors,
            batch_norms,
        }
    }

    /// Rebuilds the parameter layout from the stored config and fills it,
    /// checking every name and shape.
    pub fn from_checkpoint(ckpt: &EncoderCheckpoint) -> Result<Self> {
        if ckpt.format_version != ENCODER_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported encoder format version {}",
                ckpt.format_version
            )));
        }
        let mut state = EncoderState::new(ckpt.config.clone(), 0)?;
        if ckpt.tensors.len() != state.store.len() || ckpt.batch_norms.len() != state.bns.len() {
            return Err(Error::Checkpoint(
                "tensor or batch-norm count does not match the config".into(),
            ));
        }
        for (i, rec) in ckpt.tensors.iter().enumerate() {
            if rec.name != state.names[i] {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: expected `{}`, found `{}`",
                    state.names[i], rec.name
                )));
            }
            let p = state.store.get_mut(crate::numeric::ParamId(i));
            if p.value.shape() != (rec.rows, rec.cols) {
                return Err(Error::Checkpoint(format!("tensor `{}` has the wrong shape", rec.name)));
            }
            p.value = Matrix::from_vec(rec.rows, rec.cols, rec.data.clone())
                .map_err(|e| Error::Checkpoint(format!("tensor `{}`: {e}", rec.name)))?;
        }
        for (i, rec) in ckpt.batch_norms.iter().enumerate() {
            let bn = &mut state.bns[i];
            if rec.name != state.bn_names[i]
                || rec.running_mean.len() != bn.width()
                || rec.running_var.len() != bn.width()
            {
                return Err(Error::Checkpoint(format!("batch norm `{}` does not match", rec.name)));
            }
            bn.running_mean = rec.running_mean.clone();
            bn.running_var = rec.running_var.clone();
            bn.momentum = rec.momentum;
            bn.eps = rec.eps;
            bn.virtual_batch_size = rec.virtual_batch_size.unwrap_or(usize::MAX);
        }
        Ok(state)
    }
}
