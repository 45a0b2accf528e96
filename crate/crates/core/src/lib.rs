//! Filter-centric vector indexing.
//!
//! Filter attributes are folded into the vector space by a transform
//! `psi(v, f)`, after which any nearest-neighbor backend serves filtered
//! queries without predicate evaluation at search time.

pub mod bench;
pub mod engine;
pub mod error;
pub mod index;
pub mod storage;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
