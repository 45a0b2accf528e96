//! Test-side reference computations, written independently of the engine.
#![allow(dead_code)]

use fcvi::bench::{Dataset, WorkloadSpec};
use fcvi::engine::RecordStore;

pub fn store_of(data: &Dataset) -> RecordStore {
    RecordStore::new(data.schema.clone(), data.d, data.vectors.clone(), data.filters.clone()).unwrap()
}

pub fn small_spec(n: usize, seed: u64) -> WorkloadSpec {
    WorkloadSpec {
        n,
        d: 16,
        m: 3,
        selectivity: 0.05,
        queries: 30,
        seed,
        ..WorkloadSpec::default()
    }
}

/// z-scores `x` with the store's fitted statistics.
pub fn zscore(x: &[f32], mean: &[f64], std: &[f64]) -> Vec<f64> {
    x.iter().zip(mean).zip(std).map(|((&v, m), s)| (v as f64 - m) / s).collect()
}

pub fn norm_query(store: &RecordStore, q: &[f32]) -> Vec<f64> {
    let st = store.stats();
    zscore(q, &st.vector_mean, &st.vector_std)
}

/// Normalized probe for an all-exact numeric filter.
pub fn norm_probe(store: &RecordStore, raw: &[f32]) -> Vec<f64> {
    let st = store.stats();
    zscore(raw, &st.filter_mean, &st.filter_std)
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn score(store: &RecordStore, id: u32, zq: &[f64], probes: &[Vec<f64>], lambda: f64) -> f64 {
    let vs = 1.0 / (1.0 + euclid(store.norm_vector(id), zq));
    let fs = probes
        .iter()
        .map(|p| 1.0 / (1.0 + euclid(store.norm_filter(id), p)))
        .fold(f64::NEG_INFINITY, f64::max);
    lambda * vs + (1.0 - lambda) * fs
}

/// Full scan by combined score, ties by ascending id.
pub fn naive_oracle(store: &RecordStore, zq: &[f64], probes: &[Vec<f64>], lambda: f64, k: usize) -> Vec<u32> {
    let mut all: Vec<(f64, u32)> = store
        .live_ids()
        .map(|id| (score(store, id, zq, probes, lambda), id))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Plain k-NN over normalized vectors.
pub fn naive_knn(store: &RecordStore, zq: &[f64], k: usize) -> Vec<u32> {
    let mut all: Vec<(f64, u32)> = store.live_ids().map(|id| (euclid(store.norm_vector(id), zq), id)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, id)| id).collect()
}

pub fn overlap(got: &[u32], truth: &[u32]) -> f64 {
    got.iter().filter(|id| truth.contains(id)).count() as f64 / truth.len() as f64
}
