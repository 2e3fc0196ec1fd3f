use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};

/// Which rows the two Stage-2 encoders are trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Rows {
    /// Rows whose true superclass matches the stage.
    #[default]
    GroundTruth,
    /// Rows the trained Stage-1 encoder routes to the stage.
    Stage1Routed,
}

/// Geometry and training regimen of the three cascade stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagePlan {
    pub stage1: EncoderConfig,
    pub stage2p: EncoderConfig,
    pub stage2h: EncoderConfig,
    pub epochs: usize,
    pub base_lr: f64,
    pub lr_step: usize,
    pub lr_factor: f64,
    /// Mini-batch size; the whole set is one batch when it is smaller.
    pub batch_size: usize,
    pub seed: u64,
    /// Inverse-frequency class weights in the cross-entropy.
    #[serde(default)]
    pub class_weighting: bool,
    /// Stop a stage once its epoch loss has not improved for this many epochs.
    #[serde(default)]
    pub patience: Option<usize>,
    #[serde(default)]
    pub stage2_rows: Stage2Rows,
    /// Re-estimate batch-norm running statistics with the final weights
    /// after the last epoch.
    #[serde(default = "yes")]
    pub recalibrate_bn: bool,
}

fn yes() -> bool {
    true
}

impl StagePlan {
    /// Stage-1 with 5 steps and n_a = n_d = 40; both Stage-2 encoders with
    /// 2 steps and n_a = n_d = 50; 250 epochs at 0.09 decayed by 0.9 every 50.
    pub fn new(n_features: usize) -> Self {
        Self {
            stage1: EncoderConfig::new(5, 40, 40, 2, n_features),
            stage2p: EncoderConfig::new(2, 50, 50, 2, n_features),
            stage2h: EncoderConfig::new(2, 50, 50, 2, n_features),
            epochs: 250,
            base_lr: 0.09,
            lr_step: 50,
            lr_factor: 0.9,
            batch_size: 256,
            seed: 0,
            class_weighting: false,
            patience: None,
            stage2_rows: Stage2Rows::GroundTruth,
            recalibrate_bn: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    /// Rebinds every stage to `n_features` inputs.
    pub fn with_features(mut self, n_features: usize) -> Self {
        self.stage1.n_features = n_features;
        self.stage2p.n_features = n_features;
        self.stage2h.n_features = n_features;
        self
    }

    pub fn n_features(&self) -> usize {
        self.stage1.n_features
    }

    /// Stage-1 geometry with four output classes, for the flat baseline.
    pub fn single_stage_config(&self) -> EncoderConfig {
        EncoderConfig {
            n_classes: 4,
            ..self.stage1.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, m: &str| Error::Spec {
            field: f.into(),
            message: m.into(),
        };
        for (name, cfg) in [("stage1", &self.stage1), ("stage2p", &self.stage2p), ("stage2h", &self.stage2h)] {
            cfg.validate().map_err(|e| field(name, &e.to_string()))?;
            if cfg.n_classes != 2 {
                return Err(field(name, "cascade stages are binary"));
            }
        }
        if self.stage2p.n_features != self.stage1.n_features || self.stage2h.n_features != self.stage1.n_features {
            return Err(field("stage2", "all stages must share n_features"));
        }
        if self.epochs == 0 {
            return Err(field("epochs", "must be at least 1"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(field("base_lr", "must be a positive number"));
        }
        if self.lr_step == 0 {
            return Err(field("lr_step", "must be at least 1"));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor <= 1.0) {
            return Err(field("lr_factor", "must lie in (0, 1]"));
        }
        if self.batch_size < 2 {
            return Err(field("batch_size", "must be at least 2"));
        }
        if self.patience == Some(0) {
            return Err(field("patience", "must be at least 1 when set"));
        }
        Ok(())
    }
}
