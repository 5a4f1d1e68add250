//! Embedding matrices, label sets and pairwise similarity.

mod labels;
mod matrix;
mod pairs;

pub use labels::{LabelKind, LabelSet, LabelValue};
pub use matrix::{normalize_name, EmbeddingMatrix, Entity};
pub use pairs::{centroid, cosine, cosine_with_norms, dot, norm, pairwise, row_norms, PairRow, PairTable};
