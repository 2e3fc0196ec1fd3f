//! Dense matrices, a reverse-mode tape, normalization, losses and optimization.

mod batchnorm;
mod gradcheck;
pub mod kernels;
mod matrix;
mod optim;
mod param;
mod seed;
mod tape;

pub use batchnorm::{BatchNormState, Mode, DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM};
pub use gradcheck::grad_check;
pub use matrix::Matrix;
pub use optim::{lr_at_epoch, Adam};
pub use param::{ParamId, ParamStore, Parameter};
pub use seed::derive_seed;
pub use tape::{ghost_chunks, ChunkStats, Gradients, Tape, Var};
