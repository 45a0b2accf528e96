//! Pre-filter and post-filter baselines. Both rank by vector distance in
//! normalized space and report the same combined score as FCVI.

use super::fcvi::score_record;
use super::score::{ScoredHit, SearchParams};
use super::store::RecordStore;
use crate::error::{Error, Result};
use crate::index::{by_distance_then_id, Backend, BackendConfig, VectorIndex};
use crate::transform::{encode_query_filter, QueryFilter};

pub const DEFAULT_OVERSAMPLE: usize = 10;

fn prepare(
    store: &RecordStore,
    q: &[f32],
    qf: &QueryFilter,
    params: &SearchParams,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if params.k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let zq = store.normalize_query(q)?;
    let probes = store.normalize_probes(&encode_query_filter(store.schema(), qf, params.probes)?)?;
    Ok((zq, probes))
}

/// Scans predicates over every live record, then exact k-NN on the subset.
pub fn prefilter_search(
    store: &RecordStore,
    q: &[f32],
    qf: &QueryFilter,
    params: &SearchParams,
) -> Result<Vec<ScoredHit>> {
    let compiled = qf.compile(store.schema())?;
    let (zq, probes) = prepare(store, q, qf, params)?;
    let mut subset: Vec<(f64, u32)> = store
        .live_ids()
        .filter(|&id| compiled.matches(store.raw_filter(id)))
        .map(|id| (sq_dist(store.norm_vector(id), &zq), id))
        .collect();
    let k = params.k.min(subset.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < subset.len() {
        subset.select_nth_unstable_by(k - 1, by_distance_then_id);
        subset.truncate(k);
    }
    subset.sort_unstable_by(by_distance_then_id);
    Ok(subset
        .into_iter()
        .map(|(_, id)| score_record(store, id, &zq, &probes, params.lambda))
        .collect())
}

/// ANN index over normalized (untransformed) vectors for post-filtering.
#[derive(Debug, Clone)]
pub struct PostfilterIndex {
    backend: Backend,
}

impl PostfilterIndex {
    pub fn build(store: &RecordStore, config: BackendConfig) -> Result<Self> {
        let flat: Vec<f32> = store.norm_vectors().iter().map(|&x| x as f32).collect();
        let mut backend = config.build(store.dim(), &flat)?;
        for id in store.tombstones() {
            backend.mark_deleted(id)?;
        }
        Ok(PostfilterIndex { backend })
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn memory_bytes(&self) -> usize {
        self.backend.memory_bytes()
    }

    pub fn insert(&mut self, store: &RecordStore, id: u32) -> Result<()> {
        let v: Vec<f32> = store.norm_vector(id).iter().map(|&x| x as f32).collect();
        self.backend.insert(id, &v)
    }
}

/// Retrieves `oversample * k` nearest vectors, then drops predicate
/// violators; may return fewer than `k`.
pub fn postfilter_search(
    store: &RecordStore,
    ann: &PostfilterIndex,
    q: &[f32],
    qf: &QueryFilter,
    params: &SearchParams,
    oversample: usize,
) -> Result<Vec<ScoredHit>> {
    if oversample == 0 {
        return Err(Error::InvalidParameter("oversample must be >= 1".into()));
    }
    let compiled = qf.compile(store.schema())?;
    let (zq, probes) = prepare(store, q, qf, params)?;
    let zq32: Vec<f32> = zq.iter().map(|&x| x as f32).collect();
    let count = params.k.saturating_mul(oversample);
    let found = ann.backend.search(&zq32, count, count.max(params.ef_search))?;
    Ok(found
        .into_iter()
        .filter(|h| compiled.matches(store.raw_filter(h.id)))
        .take(params.k)
        .map(|h| score_record(store, h.id, &zq, &probes, params.lambda))
        .collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
