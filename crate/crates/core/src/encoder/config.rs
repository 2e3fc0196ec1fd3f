use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::DEFAULT_BN_MOMENTUM;

/// Hyperparameters of one encoder path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    /// Number of decision steps.
    pub n_steps: usize,
    /// Width of the attention branch of the split.
    pub n_a: usize,
    /// Width of the decision branch of the split.
    pub n_d: usize,
    /// Prior relaxation; 1 forbids reusing a feature once fully selected.
    pub gamma: f64,
    pub lambda_sparse: f64,
    pub n_shared_glu: usize,
    pub n_step_glu: usize,
    pub virtual_batch_size: usize,
    pub bn_momentum: f64,
    pub n_classes: usize,
    pub n_features: usize,
}

impl EncoderConfig {
    pub const DEFAULT_GAMMA: f64 = 1.3;
    pub const DEFAULT_LAMBDA_SPARSE: f64 = 1e-3;
    pub const DEFAULT_VIRTUAL_BATCH: usize = 128;

    /// A config with the library defaults for everything but the geometry.
    pub fn new(n_steps: usize, n_a: usize, n_d: usize, n_classes: usize, n_features: usize) -> Self {
        Self {
            n_steps,
            n_a,
            n_d,
            gamma: Self::DEFAULT_GAMMA,
            lambda_sparse: Self::DEFAULT_LAMBDA_SPARSE,
            n_shared_glu: 2,
            n_step_glu: 2,
            virtual_batch_size: Self::DEFAULT_VIRTUAL_BATCH,
            bn_momentum: DEFAULT_BN_MOMENTUM,
            n_classes,
            n_features,
        }
    }

    /// Width of the hidden representation produced by the feature transformer.
    pub fn hidden(&self) -> usize {
        self.n_d + self.n_a
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Spec {
                field: field.into(),
                message: message.into(),
            })
        };
        if self.n_steps == 0 {
            return bad("n_steps", "must be at least 1");
        }
        if self.n_a == 0 || self.n_d == 0 {
            return bad("n_a/n_d", "must be at least 1");
        }
        if !(self.gamma >= 1.0) {
            return bad("gamma", "must be >= 1");
        }
        if !(self.lambda_sparse >= 0.0) {
            return bad("lambda_sparse", "must be >= 0");
        }
        if self.n_shared_glu + self.n_step_glu == 0 {
            return bad("n_shared_glu", "the feature transformer needs at least one block");
        }
        if self.virtual_batch_size < 2 {
            return bad("virtual_batch_size", "must be at least 2");
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) {
            return bad("bn_momentum", "must lie in (0, 1)");
        }
        if self.n_classes < 2 {
            return bad("n_classes", "must be at least 2");
        }
        if self.n_features == 0 {
            return bad("n_features", "must be at least 1");
        }
        Ok(())
    }
}
