//! Nearest-neighbor backends over flat `f32` vectors.
//!
//! Both backends share [`VectorIndex`]: results come back sorted ascending
//! by exact Euclidean distance with ties broken by ascending id, and
//! tombstoned ids never appear in results.

pub mod brute;
pub mod distance;
pub mod hnsw;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use brute::BruteForceIndex;
pub use distance::{euclidean, sq_euclidean};
pub use hnsw::{HnswIndex, HnswParams};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub distance: f64,
}

/// Total order used at every sort boundary: distance, then id.
pub(crate) fn by_distance_then_id(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

pub trait VectorIndex: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of live (non-tombstoned) vectors.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&mut self, id: u32, vector: &[f32]) -> Result<()>;

    fn mark_deleted(&mut self, id: u32) -> Result<()>;

    /// Up to `count` nearest live vectors. `effort` is the beam width for
    /// graph backends and is ignored by exhaustive ones.
    fn search(&self, query: &[f32], count: usize, effort: usize) -> Result<Vec<Neighbor>>;

    /// Stored vector for `id`, including tombstoned ones.
    fn vector(&self, id: u32) -> Option<&[f32]>;

    fn is_deleted(&self, id: u32) -> bool;

    /// Approximate heap footprint in bytes.
    fn memory_bytes(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    BruteForce,
    Hnsw,
}

impl BackendKind {
    pub fn tag(self) -> u8 {
        match self {
            BackendKind::BruteForce => 1,
            BackendKind::Hnsw => 2,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            BackendKind::BruteForce => "bf",
            BackendKind::Hnsw => "hnsw",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bf" | "brute" | "brute_force" | "brute-force" => Ok(BackendKind::BruteForce),
            "hnsw" => Ok(BackendKind::Hnsw),
            other => Err(crate::error::Error::InvalidParameter(format!(
                "unknown backend `{other}`"
            ))),
        }
    }
}

/// Backend choice plus its construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub hnsw: HnswParams,
    pub seed: u64,
}

impl BackendConfig {
    pub fn brute_force() -> Self {
        BackendConfig {
            kind: BackendKind::BruteForce,
            hnsw: HnswParams::default(),
            seed: 0,
        }
    }

    pub fn hnsw(params: HnswParams, seed: u64) -> Self {
        BackendConfig {
            kind: BackendKind::Hnsw,
            hnsw: params,
            seed,
        }
    }

    /// Builds a backend over row-major `vectors`, assigning ids 0..n.
    pub fn build(&self, dim: usize, vectors: &[f32]) -> Result<Backend> {
        Ok(match self.kind {
            BackendKind::BruteForce => Backend::BruteForce(BruteForceIndex::build(dim, vectors)?),
            BackendKind::Hnsw => Backend::Hnsw(HnswIndex::build(dim, vectors, self.hnsw, self.seed)?),
        })
    }
}

/// Concrete backend, dispatching to one of the implementations.
#[derive(Debug, Clone)]
pub enum Backend {
    BruteForce(BruteForceIndex),
    Hnsw(HnswIndex),
}

impl Backend {
    pub fn kind(&self) -> BackendKind {
        match self {
            Backend::BruteForce(_) => BackendKind::BruteForce,
            Backend::Hnsw(_) => BackendKind::Hnsw,
        }
    }

    fn inner(&self) -> &dyn VectorIndex {
        match self {
            Backend::BruteForce(b) => b,
            Backend::Hnsw(h) => h,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn VectorIndex {
        match self {
            Backend::BruteForce(b) => b,
            Backend::Hnsw(h) => h,
        }
    }
}

impl VectorIndex for Backend {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn len(&self) -> usize {
        self.inner().len()
    }

    fn insert(&mut self, id: u32, vector: &[f32]) -> Result<()> {
        self.inner_mut().insert(id, vector)
    }

    fn mark_deleted(&mut self, id: u32) -> Result<()> {
        self.inner_mut().mark_deleted(id)
    }

    fn search(&self, query: &[f32], count: usize, effort: usize) -> Result<Vec<Neighbor>> {
        self.inner().search(query, count, effort)
    }

    fn vector(&self, id: u32) -> Option<&[f32]> {
        self.inner().vector(id)
    }

    fn is_deleted(&self, id: u32) -> bool {
        self.inner().is_deleted(id)
    }

    fn memory_bytes(&self) -> usize {
        self.inner().memory_bytes()
    }
}
