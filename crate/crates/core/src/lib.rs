//! Generated-image source attribution toolkit.
//!
//! The crate is organised around the stages of an attribution study:
//!
//! - [`corpus`]: manifests, label taxonomies, splits, edit-ratio bins and a
//!   procedural generator corpus used as a deterministic stand-in dataset.
//! - [`pixelops`]: preprocessing, augmentation, high-frequency perturbations
//!   and the Canny mid-level representation.
//! - [`features`]: a frozen convolutional pyramid, feature-file ingestion,
//!   pixel-grid and hashed text embeddings.
//! - [`style`]: cosine Gram matrices and multi-layer style vectors.
//! - [`attributor`]: linear / MLP heads trained with AdamW and a
//!   warmup + cosine schedule.
//! - [`evalkit`]: metrics, confusion matrices, cross-domain grids, post-edit
//!   bins, sweeps and analysis exports.
//! - [`pipeline`]: glue that turns a manifest record into an embedding.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attributor;
pub mod binio;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod features;
pub mod histogram;
pub mod pipeline;
pub mod pixelops;
pub mod rng;
pub mod style;

pub use error::{Error, Result};
