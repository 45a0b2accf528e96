use std::collections::HashSet;

use crate::engine::{combined_score, similarity, RecordStore};
use crate::error::Result;
use crate::transform::{encode_query_filter, QueryFilter};

/// True top-`k` live records by combined score against normalized query
/// `zq` and probe set `probes` (filter similarity to the nearest probe);
/// ties by ascending id.
pub fn exhaustive_oracle(
    store: &RecordStore,
    zq: &[f64],
    probes: &[Vec<f64>],
    lambda: f64,
    k: usize,
) -> Result<Vec<u32>> {
    let mut scored: Vec<(f64, u32)> = Vec::with_capacity(store.live_len());
    for id in store.live_ids() {
        let vs = similarity(store.norm_vector(id), zq)?;
        let mut fs = 0.0f64;
        for p in probes {
            fs = fs.max(similarity(store.norm_filter(id), p)?);
        }
        scored.push((combined_score(lambda, vs, fs), id));
    }
    let order = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    let k = k.min(scored.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    Ok(scored.into_iter().map(|(_, id)| id).collect())
}

/// Oracle for a raw query vector and filter, encoded as the engine does.
pub fn oracle_for_query(
    store: &RecordStore,
    q: &[f32],
    qf: &QueryFilter,
    probes: usize,
    lambda: f64,
    k: usize,
) -> Result<Vec<u32>> {
    let zq = store.normalize_query(q)?;
    let probe_vectors = store.normalize_probes(&encode_query_filter(store.schema(), qf, probes)?)?;
    exhaustive_oracle(store, &zq, &probe_vectors, lambda, k)
}

/// `|result ∩ oracle| / |oracle|`.
pub fn recall_at_k(result: &[u32], oracle: &[u32]) -> f64 {
    if oracle.is_empty() {
        return 1.0;
    }
    let truth: HashSet<u32> = oracle.iter().copied().collect();
    let hit = result
        .iter()
        .collect::<HashSet<_>>()
        .into_iter()
        .filter(|id| truth.contains(id))
        .count();
    hit as f64 / oracle.len() as f64
}
