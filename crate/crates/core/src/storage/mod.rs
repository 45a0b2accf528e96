//! Persistence of datasets and indexes, and ingestion of `fvecs`/`bvecs`
//! vectors and attribute CSV files.

pub mod attributes;
pub mod container;
pub mod vecs;

pub use attributes::{attributes_to_csv, encode_attribute_rows, load_attributes_csv, parse_attributes_csv};
pub use container::{
    decode_index, encode_dataset, encode_index, inspect, load_dataset, load_index, save_dataset, save_index, Container, FLAG_AUX, FLAG_GRAPH, FLAG_TRANSFORM, MAGIC, VERSION,
};
pub use vecs::{encode_fvecs, load_bvecs, load_fvecs, parse_bvecs, parse_fvecs, save_fvecs, VectorFile};

use std::path::Path;

use crate::engine::RecordStore;
use crate::error::Result;
use crate::transform::FilterSchema;

/// Pairs an `fvecs` file with an attribute CSV into a record store.
pub fn load_records(
    vectors: impl AsRef<Path>,
    attributes: impl AsRef<Path>,
    schema: FilterSchema,
) -> Result<RecordStore> {
    let vf = load_fvecs(vectors)?;
    let rows = load_attributes_csv(attributes, &schema)?;
    let filters = encode_attribute_rows(&schema, &rows, vf.len())?;
    RecordStore::new(schema, vf.dim, vf.data, filters)
}
