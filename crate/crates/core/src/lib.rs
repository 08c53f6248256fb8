//! Multi-task language identification with a two-level, margin-based
//! contrastive objective.
//!
//! A hashed character n-gram encoder feeds three heads: a binary
//! in-domain detector, a language classifier over the supported
//! languages, and a unit-norm projection used by the contrastive terms.
//! The crate covers the full loop: corpus loading and synthesis,
//! augmentation, training with AdamW and a cosine schedule, and
//! evaluation of both predictions and embedding geometry.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod augment;
pub(crate) mod rng;
pub mod config;
pub mod data;
pub mod domain;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod losses;
pub mod model;
pub mod trainer;

pub mod cli;

pub use domain::{
    derive_in_domain, margin_of, ComponentWeights, EntitySpan, Example, Hyperparams, LabelSpace,
    LanguageLabel, MarginMatrix, MarginMode, MarginTable, Preset,
};
pub use error::{Error, Result};
