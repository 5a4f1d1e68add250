//! Semantic axes: construction from labels or measurements, projection,
//! per-dimension evaluation and inter-axis geometry.

mod axis;
mod evaluate;
mod geometry;

pub use axis::{
    build_axis, project, Axis, AxisData, AxisKind, AxisRecipe, Pole, ProjectionSet, Provenance,
    TercileCut, Transform,
};
pub use evaluate::{
    categorical_delta, evaluate, evaluate_binary, evaluate_measured, evaluate_ordinal,
    rank_permutation_test, subset_report, Analysis, AxisSummary, CategoricalDelta, CrossReference, DimensionReport,
};
pub use geometry::{
    axis_geometry, paired_similarity, pole_plane_projection, read_coords_csv, GeometryReport,
    PairedSimilarity, PartialRow, PolePlane,
};
