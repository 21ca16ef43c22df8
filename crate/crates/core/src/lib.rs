//! Multi-attention stacked ensemble for imbalanced binary classification.
//!
//! Toy base classifiers share an adapter head; their logits are fused by a
//! head with model-level and class-level attention followed by a small
//! meta-learner. Training uses focal loss, mixup, weighted sampling, AdamW
//! and cosine restarts on a small reverse-mode autodiff tape.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod layers;
pub mod loss;
pub mod optim;

pub use error::{Error, Result};
