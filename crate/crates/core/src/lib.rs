//! Latent-tree sentence encoding with structural attention.
//!
//! Sentences are parsed bottom-up by a Tree-LSTM whose merge decisions are
//! sampled with a straight-through Gumbel-softmax estimator, so the parser
//! is trained from a downstream classification loss alone. Every node of the
//! induced tree (leaves and internal constituents) is then pooled by a
//! learned attention layer into a single sentence vector.
//!
//! Modules, bottom-up:
//!
//! - [`tensor`]: reverse-mode autodiff engine and finite-difference checks
//! - [`tree`]: binary parse trees and the bracketed text format
//! - [`embedding_io`]: word vectors, vocabularies, corpus readers
//! - [`parser`]: leaf transforms, the composition cell, Gumbel selection,
//!   tree induction
//! - [`attention`]: structural attention pooling over tree nodes
//! - [`classifier`]: pair featurization, MLP head, cosine probing
//! - [`model`]: the assembled encoder and classifier
//! - [`trainer`]: Adam, the training loop, evaluation, checkpoints
//! - [`tree_metrics`]: unlabeled bracket F1 and depth statistics
//! - [`cli`]: the `treeattn` command-line tool
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod attention;
pub mod classifier;
pub mod cli;
pub mod embedding_io;
pub mod error;
pub mod model;
pub mod parser;
pub mod synthetic;
pub mod tensor;
pub mod trainer;
pub mod tree;
pub mod tree_metrics;

pub use error::{Error, Result};
