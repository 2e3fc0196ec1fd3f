//! Multi-stage TabNet cascade for four-class FH risk staging.
//!
//! The crate is organized bottom-up:
//!
//! - [`numeric`]: dense matrices, a reverse-mode tape, batch norm, Adam.
//! - [`encoder`]: one attentive multi-step encoder path.
//! - [`cascade`]: the Stage-1 / Stage-2 composition and a flat four-class variant.
//! - [`data`]: tables, cleaning, one-hot encoding and the synthetic cohort.
//! - [`eval`]: stratified folds, metrics, classical baselines, the CV runner.
//!
//! A guide with worked examples lives in the repository's `book/` directory;
//! its code blocks are compiled and run as doc-tests.

pub mod error;
pub mod label;
pub mod numeric;
pub mod encoder;
pub mod data;
pub mod cascade;
pub mod eval;

pub use error::{Error, Result};
pub use label::{derive_stage_labels, dutch_score_to_label, FHLabel, Superclass};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/sparsemax.md")]
    mod sparsemax {}
    #[doc = include_str!("../../../book/src/encoder.md")]
    mod encoder {}
    #[doc = include_str!("../../../book/src/cascade.md")]
    mod cascade {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
