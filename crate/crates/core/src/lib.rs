//! Continuous prompt learning for implicit discourse relation recognition.
//!
//! The crate is organized as a pipeline:
//!
//! * [`corpus`] loads, validates and synthesizes sense-annotated argument pairs.
//! * [`vocab`] is a whitespace tokenizer with an appendable extension region.
//! * [`encoder`] is a small masked-sequence transformer with hand-written
//!   backpropagation, generic over `f32`/`f64`.
//! * [`prompting`] builds cloze prompts, the virtual answer space, integrated
//!   connectives and their embedding initializers.
//! * [`distillation`] holds teacher knowledge extraction, the student losses and
//!   two-student fusion.
//! * [`experiment`] drives training, model selection, metrics and the
//!   ablation / sweep grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod distillation;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod prompting;
pub mod vocab;

pub use error::{Error, Result};
