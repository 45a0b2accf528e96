use std::collections::HashMap;
use std::sync::Arc;

use log::warn;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::score::{by_score_then_id, combined_score, compute_k_prime, probe_sim, sim, ScoredHit, SearchParams};
use super::store::RecordStore;
use crate::error::{Error, Result};
use crate::index::{Backend, BackendConfig, VectorIndex};
use crate::transform::{
    add_offset, encode_query_filter, fit_filter_clusters, Projection, QueryFilter, TransformConfig,
    Variant,
};

/// Entries kept by the filter-center cache before it stops admitting.
pub const DEFAULT_CACHE_CAPACITY: usize = 4096;

/// How to derive the transform from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcviConfig {
    pub variant: Variant,
    pub alpha: f64,
    /// Number of filter clusters (cluster variant).
    #[serde(default)]
    pub clusters: Option<usize>,
    /// Explicit projection (embedding variant); seeded Gaussian otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
    #[serde(default)]
    pub seed: u64,
}

impl FcviConfig {
    pub fn partition(alpha: f64) -> Self {
        FcviConfig {
            variant: Variant::Partition,
            alpha,
            clusters: None,
            projection: None,
            seed: 0,
        }
    }

    /// Derives the transform for `store`, fitting centers or drawing W.
    pub fn transform_for(&self, store: &RecordStore) -> Result<TransformConfig> {
        let (d, m) = (store.dim(), store.filter_dim());
        match self.variant {
            Variant::Partition => TransformConfig::partition(d, m, self.alpha),
            Variant::Cluster => {
                let k = self.clusters.ok_or_else(|| {
                    Error::InvalidParameter("cluster variant requires a cluster count".into())
                })?;
                TransformConfig::partition(d, m, self.alpha)?;
                let live: Vec<f64> = store
                    .live_ids()
                    .flat_map(|id| store.norm_filter(id).iter().copied())
                    .collect();
                let centers = fit_filter_clusters(&live, m, k, self.seed)?;
                TransformConfig::cluster(d, m, self.alpha, centers, self.seed)
            }
            Variant::Embedding => match &self.projection {
                Some(w) => {
                    let mut cfg = TransformConfig::embedding(d, m, self.alpha, w.clone())?;
                    cfg.rng_seed = self.seed;
                    Ok(cfg)
                }
                None => TransformConfig::embedding_seeded(d, m, self.alpha, self.seed),
            },
        }
    }
}

/// Memo of normalized filter -> transform offset.
#[derive(Debug)]
pub struct FilterCache {
    map: RwLock<HashMap<Vec<u64>, Arc<[f64]>>>,
    capacity: usize,
}

impl FilterCache {
    pub fn new(capacity: usize) -> Self {
        FilterCache {
            map: RwLock::new(HashMap::new()),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().clear();
    }

    pub fn offset(&self, transform: &TransformConfig, f: &[f64]) -> Result<Arc<[f64]>> {
        let key: Vec<u64> = f.iter().map(|x| x.to_bits()).collect();
        if let Some(hit) = self.map.read().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let offset: Arc<[f64]> = transform.offset(f)?.into();
        let mut map = self.map.write();
        if map.len() < self.capacity {
            map.insert(key, Arc::clone(&offset));
        }
        Ok(offset)
    }

    fn bytes(&self) -> usize {
        self.map
            .read()
            .iter()
            .map(|(k, v)| k.len() * 8 + v.len() * 8 + 48)
            .sum()
    }
}

impl Clone for FilterCache {
    fn clone(&self) -> Self {
        FilterCache {
            map: RwLock::new(self.map.read().clone()),
            capacity: self.capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub hits: Vec<ScoredHit>,
    pub k_prime: usize,
    pub probes: usize,
    pub candidates: usize,
    /// Set when probe expansion exceeded the cap and was trimmed.
    pub warning: Option<String>,
}

/// Transformed-space index over a record store.
#[derive(Debug, Clone)]
pub struct FcviIndex {
    store: RecordStore,
    config: FcviConfig,
    transform: TransformConfig,
    backend_config: BackendConfig,
    backend: Backend,
    cache: FilterCache,
}

impl FcviIndex {
    pub fn build(store: RecordStore, config: FcviConfig, backend: BackendConfig) -> Result<Self> {
        if store.live_len() == 0 {
            return Err(Error::EmptyDataset);
        }
        let transform = config.transform_for(&store)?;
        let cache = FilterCache::new(DEFAULT_CACHE_CAPACITY);
        let mut flat = Vec::with_capacity(store.len() * transform.output_dim());
        for id in 0..store.len() as u32 {
            let offset = cache.offset(&transform, store.norm_filter(id))?;
            flat.extend(add_offset(store.norm_vector(id), &offset).into_iter().map(|x| x as f32));
        }
        let mut index = backend.build(transform.output_dim(), &flat)?;
        for id in store.tombstones() {
            index.mark_deleted(id)?;
        }
        Ok(FcviIndex {
            store,
            config,
            transform,
            backend_config: backend,
            backend: index,
            cache,
        })
    }

    /// Reassembles an index from persisted parts.
    pub fn from_parts(
        store: RecordStore,
        config: FcviConfig,
        transform: TransformConfig,
        backend_config: BackendConfig,
        backend: Backend,
    ) -> Result<Self> {
        transform.validate()?;
        if backend.dim() != transform.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: transform.output_dim(),
                actual: backend.dim(),
            });
        }
        if backend.len() != store.live_len() {
            return Err(Error::Malformed(format!(
                "backend holds {} live vectors, store {}",
                backend.len(),
                store.live_len()
            )));
        }
        Ok(FcviIndex {
            store,
            config,
            transform,
            backend_config,
            backend,
            cache: FilterCache::new(DEFAULT_CACHE_CAPACITY),
        })
    }

    pub fn store(&self) -> &RecordStore {
        &self.store
    }

    pub fn config(&self) -> &FcviConfig {
        &self.config
    }

    pub fn transform(&self) -> &TransformConfig {
        &self.transform
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn backend_config(&self) -> &BackendConfig {
        &self.backend_config
    }

    pub fn cache(&self) -> &FilterCache {
        &self.cache
    }

    /// Live record count (equals the backend's live size).
    pub fn len(&self) -> usize {
        self.store.live_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stored transformed vector for `id`.
    pub fn transformed(&self, id: u32) -> Option<&[f32]> {
        self.backend.vector(id)
    }

    /// Backend plus cache footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.backend.memory_bytes() + self.cache.bytes()
    }

    pub fn insert(&mut self, v: &[f32], f: &[f32]) -> Result<u32> {
        let id = self.store.push(v, f)?;
        let offset = self.cache.offset(&self.transform, self.store.norm_filter(id))?;
        let t: Vec<f32> = add_offset(self.store.norm_vector(id), &offset)
            .into_iter()
            .map(|x| x as f32)
            .collect();
        self.backend.insert(id, &t)?;
        Ok(id)
    }

    pub fn delete(&mut self, id: u32) -> Result<()> {
        if self.store.is_deleted(id) {
            return Err(Error::UnknownId(id));
        }
        self.backend.mark_deleted(id)?;
        self.store.delete(id)
    }

    /// Transformed query `psi(q, f_probe)` for normalized inputs.
    pub fn transform_query(&self, zq: &[f64], probe: &[f64]) -> Result<Vec<f32>> {
        let offset = self.cache.offset(&self.transform, probe)?;
        Ok(add_offset(zq, &offset).into_iter().map(|x| x as f32).collect())
    }

    pub fn query(&self, q: &[f32], qf: &QueryFilter, params: &SearchParams) -> Result<QueryResult> {
        params.validate()?;
        let zq = self.store.normalize_query(q)?;
        let probe_set = encode_query_filter(self.store.schema(), qf, params.probes)?;
        let probes = self.store.normalize_probes(&probe_set)?;
        let warning = probe_set.trimmed.then(|| {
            let msg = format!(
                "probe expansion trimmed from {} to {} vectors",
                probe_set.expanded,
                probes.len()
            );
            warn!("{msg}");
            msg
        });
        if self.is_empty() {
            return Ok(QueryResult {
                hits: Vec::new(),
                k_prime: 0,
                probes: probes.len(),
                candidates: 0,
                warning,
            });
        }
        let k_prime = compute_k_prime(params.k, params.lambda, self.transform.alpha, params.c, self.len())?;
        let effort = k_prime.max(params.ef_search);

        let mut candidates: Vec<u32> = Vec::with_capacity(k_prime * probes.len());
        for probe in &probes {
            let tq = self.transform_query(&zq, probe)?;
            candidates.extend(self.backend.search(&tq, k_prime, effort)?.into_iter().map(|h| h.id));
        }
        candidates.sort_unstable();
        candidates.dedup();

        let mut hits: Vec<ScoredHit> = candidates
            .iter()
            .map(|&id| self.score(id, &zq, &probes, params.lambda))
            .collect();
        hits.sort_unstable_by(by_score_then_id);
        hits.truncate(params.k);
        Ok(QueryResult {
            hits,
            k_prime,
            probes: probes.len(),
            candidates: candidates.len(),
            warning,
        })
    }

    /// Query whose filter carries at least one range or one-of predicate.
    pub fn multi_probe_query(
        &self,
        q: &[f32],
        qf: &QueryFilter,
        params: &SearchParams,
    ) -> Result<QueryResult> {
        if !qf.is_expanding() {
            return Err(Error::InvalidPredicate(
                "multi-probe query needs a range or one-of predicate".into(),
            ));
        }
        self.query(q, qf, params)
    }

    /// Re-scores `id` from its normalized originals.
    pub fn score(&self, id: u32, zq: &[f64], probes: &[Vec<f64>], lambda: f64) -> ScoredHit {
        score_record(&self.store, id, zq, probes, lambda)
    }
}

pub(crate) fn score_record(
    store: &RecordStore,
    id: u32,
    zq: &[f64],
    probes: &[Vec<f64>],
    lambda: f64,
) -> ScoredHit {
    let vector_sim = sim(store.norm_vector(id), zq);
    let filter_sim = probe_sim(store.norm_filter(id), probes);
    ScoredHit {
        id,
        vector_sim,
        filter_sim,
        score: combined_score(lambda, vector_sim, filter_sim),
    }
}
