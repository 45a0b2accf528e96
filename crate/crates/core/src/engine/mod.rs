//! Offline transform-and-index and online transform-retrieve-rescore
//! pipeline, with pre-/post-filter baselines.

pub mod baseline;
pub mod fcvi;
pub mod score;
pub mod store;

pub use baseline::{postfilter_search, prefilter_search, PostfilterIndex, DEFAULT_OVERSAMPLE};
pub use fcvi::{FcviConfig, FcviIndex, FilterCache, QueryResult, DEFAULT_CACHE_CAPACITY};
pub use score::{combined_score, compute_k_prime, similarity, ScoredHit, SearchParams};
pub use store::RecordStore;
