//! Consolidation maps, curator overrides, embedding averaging and
//! variant-noise diagnostics.

mod map;
mod noise;
mod overrides;

pub use map::{
    back_project, check_categories, consolidate, Canonical, ConsolidationMap, MapEntry,
    MAX_CATEGORIES, TAXONOMY,
};
pub use noise::{variant_noise, Baseline, GroupNoise, VariantNoiseReport, BASELINE_PAIRS};
pub use overrides::{apply_overrides, AuditEntry, OverrideAction, OverrideSet};
