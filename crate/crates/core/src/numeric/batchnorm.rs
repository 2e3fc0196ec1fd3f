//! Batch normalization with optional ghost (virtual) batches.
//!
//! Normalization uses the population variance (divide by the batch size).
//! Running statistics follow `running = (1 − momentum)·running + momentum·batch`,
//! updated once per virtual batch in order.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::param::{ParamId, ParamStore};
use super::tape::{ChunkStats, Tape, Var};
use crate::error::Result;

pub const DEFAULT_BN_EPS: f64 = 1e-9;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Training,
    Inference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub scale: ParamId,
    pub shift: ParamId,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    /// Rows per virtual batch; `usize::MAX` disables ghost batching.
    pub virtual_batch_size: usize,
}

impl BatchNormState {
    /// Scale 1, shift 0, running mean 0 and running variance 1.
    pub fn new(store: &mut ParamStore, width: usize, momentum: f64, virtual_batch_size: usize) -> Self {
        Self {
            scale: store.add(Matrix::filled(1, width, 1.0)),
            shift: store.add(Matrix::zeros(1, width)),
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum,
            eps: DEFAULT_BN_EPS,
            virtual_batch_size,
        }
    }

    pub fn width(&self) -> usize {
        self.running_mean.len()
    }

    /// Records the normalization on `tape`. In training mode the observed
    /// per-chunk statistics are returned for [`BatchNormState::apply_stats`];
    /// the state itself is never touched here.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        mode: Mode,
    ) -> Result<(Var, Option<Vec<ChunkStats>>)> {
        let scale = tape.param(store, self.scale);
        let shift = tape.param(store, self.shift);
        match mode {
            Mode::Training => {
                let (y, stats) =
                    tape.batch_norm_train(x, scale, shift, self.virtual_batch_size, self.eps)?;
                Ok((y, Some(stats)))
            }
            Mode::Inference => {
                let y = tape.batch_norm_eval(
                    x,
                    scale,
                    shift,
                    &self.running_mean,
                    &self.running_var,
                    self.eps,
                )?;
                Ok((y, None))
            }
        }
    }

    pub fn apply_stats(&mut self, stats: &[ChunkStats]) {
        let m = self.momentum;
        for s in stats {
            for (r, b) in self.running_mean.iter_mut().zip(&s.mean) {
                *r = (1.0 - m) * *r + m * b;
            }
            for (r, b) in self.running_var.iter_mut().zip(&s.var) {
                *r = (1.0 - m) * *r + m * b;
            }
        }
    }
}
