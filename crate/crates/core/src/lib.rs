//! Curation and statistical analysis of fixed entity embedding spaces.
//!
//! The crate consolidates noisy vocabularies into curated embeddings,
//! builds semantic axes from labels or measurements, and validates them with
//! rank statistics, cross-validation, neighbourhood purity and permutation
//! tests. Every resampling routine is driven by a [`stats::Seed`] so results
//! do not depend on thread count.

pub mod axes;
pub mod corpus;
pub mod crossval;
pub mod culture;
pub mod curation;
pub mod stats;
pub mod synth;
pub mod tagger;
pub mod error;
pub mod matchdb;
pub mod provider;

pub use error::{Error, Result};
