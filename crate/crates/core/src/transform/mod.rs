//! Normalization, filter encoding, and the filter-centric transform family.

pub mod kmeans;
pub mod normalize;
pub mod psi;
pub mod query_filter;
pub mod schema;
pub mod theory;

pub use kmeans::fit_filter_clusters;
pub use normalize::{apply_normalizer, fit_normalizer, NormStats, DEFAULT_EPSILON};
pub use psi::{
    add_offset, nearest_center, pad, padded_dim, psi_cluster, psi_embedding, psi_partition,
    Projection, TransformConfig, Variant,
};
pub use query_filter::{
    encode_query_filter, encode_query_filter_capped, range_points, CompiledFilter, Predicate,
    ProbeSet, QueryFilter, DEFAULT_PROBE_CAP,
};
pub use schema::{encode_filter_values, AttrValue, Attribute, AttributeKind, FilterSchema, FilterVector};
pub use theory::{optimal_alpha, separation_alpha};
