//! Deep learning on attributed sequences.
//!
//! An attributed sequence pairs a fixed-width attribute vector with a
//! variable-length sequence of categorical items. This crate provides four
//! frameworks over such records, all built on a small numeric kernel with
//! hand-derived gradients:
//!
//! - [`nas`]: unsupervised embedding, an attribute autoencoder conditioning
//!   an LSTM next-item predictor.
//! - [`mlas`]: metric learning from pairwise similar/dissimilar feedback.
//! - [`olas`]: one-shot classification of unseen classes against a gallery.
//! - [`amas`]: attention-based classification.
//!
//! [`data`] holds records, encoding and synthetic corpora, [`metrics`] the
//! evaluation protocols, [`checkpoint`] persistence and [`cli`] the command
//! pipelines behind the `attrseq` binary.

pub mod amas;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod history;
pub mod metrics;
pub mod mlas;
pub mod nas;
pub mod numerics;
pub mod olas;

pub use error::{Error, Result};
