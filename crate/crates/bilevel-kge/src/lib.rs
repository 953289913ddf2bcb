//! Bi-level knowledge graph embedding.
//!
//! A bi-level knowledge graph contains ordinary (base-level) triplets plus
//! higher-level triplets: directed, labeled edges between two base-level
//! triplets. This crate provides the full pipeline around that structure:
//!
//! - [`kg`]: TSV ingestion, interning, indices, dataset statistics
//! - [`walk`]: random-walk sampling, relation-sequence confidence scoring,
//!   and emission of the augmented triple set
//! - [`quat`]: quaternion arithmetic for the scoring backbone
//! - [`model`]: embedding tables, scoring at both levels, losses and
//!   hand-derived gradients
//! - [`train`]: negative sampling, Adagrad updates, the training loop
//! - [`eval`]: filtered ranking for triplet prediction, conditional link
//!   prediction, and base-level link prediction
//! - [`config`]: run configuration and named hyperparameter presets

pub mod config;
pub mod eval;
pub mod kg;
pub mod model;
pub mod quat;
pub mod train;
pub mod walk;
