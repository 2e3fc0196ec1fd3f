//! One multi-step attentive encoder path.

mod checkpoint;
mod config;
mod importance;
mod network;

pub(crate) use checkpoint::exact;
pub use checkpoint::{BatchNormRecord, EncoderCheckpoint, TensorRecord, ENCODER_FORMAT_VERSION};
pub use config::EncoderConfig;
pub use importance::{aggregate_feature_importance, FeatureImportance};
pub use network::{
    apply_mask, encoder_loss, materialize, update_prior, EncoderOutput, EncoderState, ForwardPass,
    StepTrace, StepVars, ENTROPY_EPS,
};
