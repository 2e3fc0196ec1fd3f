//! JSON envelope for a trained cascade.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::CascadeModel;
use super::plan::StagePlan;
use super::train::TrainingLog;
use crate::data::{FeatureEncoding, ManifestEntry};
use crate::encoder::{EncoderCheckpoint, EncoderState};
use crate::error::{Error, Result};

pub const CASCADE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeCheckpoint {
    pub format_version: u32,
    pub plan: StagePlan,
    pub encoding: FeatureEncoding,
    pub manifest: Vec<ManifestEntry>,
    pub stage1: EncoderCheckpoint,
    pub stage2p: EncoderCheckpoint,
    pub stage2h: EncoderCheckpoint,
    pub log: TrainingLog,
    /// Free-form record of how the model was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl CascadeModel {
    pub fn to_checkpoint(&self) -> CascadeCheckpoint {
        use crate::label::Superclass::*;
        CascadeCheckpoint {
            format_version: CASCADE_FORMAT_VERSION,
            plan: self.plan().clone(),
            encoding: self.encoding().clone(),
            manifest: self.manifest().to_vec(),
            stage1: self.stage1().to_checkpoint(),
            stage2p: self.stage2(Patient).to_checkpoint(),
            stage2h: self.stage2(Healthy).to_checkpoint(),
            log: self.log().clone(),
            provenance: None,
        }
    }

    pub fn from_checkpoint(ckpt: &CascadeCheckpoint) -> Result<Self> {
        if ckpt.format_version != CASCADE_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported cascade format version {}",
                ckpt.format_version
            )));
        }
        if ckpt.encoding.manifest() != ckpt.manifest {
            return Err(Error::Checkpoint("manifest disagrees with the stored encoding".into()));
        }
        let stages = [&ckpt.stage1, &ckpt.stage2p, &ckpt.stage2h];
        if stages.iter().any(|s| s.config.n_features != ckpt.manifest.len()) {
            return Err(Error::Checkpoint("encoder width differs from the manifest".into()));
        }
        Ok(CascadeModel::from_parts(
            ckpt.plan.clone(),
            ckpt.encoding.clone(),
            EncoderState::from_checkpoint(&ckpt.stage1)?,
            EncoderState::from_checkpoint(&ckpt.stage2p)?,
            EncoderState::from_checkpoint(&ckpt.stage2h)?,
            ckpt.log.clone(),
        ))
    }
}

impl CascadeCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
