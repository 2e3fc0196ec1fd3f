//! The two-stage cascade: Stage-1 decides Patient vs Healthy, then one of
//! two binary Stage-2 encoders refines the label inside the chosen superclass.
//! A flat four-class encoder is provided as the comparison model.

mod checkpoint;
mod explain;
mod model;
mod plan;
mod train;

pub use checkpoint::{CascadeCheckpoint, CASCADE_FORMAT_VERSION};
pub use explain::{explain, group_by_source, RankedFeature, StageImportance};
pub use model::{check_manifest, CascadeModel, CascadePrediction, RowTrace, SinglePrediction, SingleStageModel};
pub use plan::{Stage2Rows, StagePlan};
pub use train::{
    check_training_labels, train_cascade, train_cascade_concurrent, train_encoder, train_single_stage,
    StageLog, TrainingLog, SINGLE_STAGE, STAGE1, STAGE2H, STAGE2P,
};
