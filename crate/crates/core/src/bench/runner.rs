use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::oracle::{oracle_for_query, recall_at_k};
use super::workload::{Dataset, Query};
use crate::engine::{
    postfilter_search, prefilter_search, FcviConfig, FcviIndex, PostfilterIndex, RecordStore,
    SearchParams, DEFAULT_OVERSAMPLE,
};
use crate::error::{Error, Result};
use crate::index::{BackendConfig, BackendKind, HnswParams};

pub const WARMUP_QUERIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Fcvi(BackendKind),
    Prefilter,
    Postfilter(BackendKind),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Fcvi(BackendKind::BruteForce),
        Method::Fcvi(BackendKind::Hnsw),
        Method::Prefilter,
        Method::Postfilter(BackendKind::BruteForce),
        Method::Postfilter(BackendKind::Hnsw),
    ];

    pub fn family(self) -> &'static str {
        match self {
            Method::Fcvi(_) => "fcvi",
            Method::Prefilter => "prefilter",
            Method::Postfilter(_) => "postfilter",
        }
    }

    pub fn backend_name(self) -> &'static str {
        match self {
            Method::Fcvi(b) | Method::Postfilter(b) => b.short_name(),
            Method::Prefilter => "scan",
        }
    }

    /// Parses a comma-separated method list.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Method::from_str)
            .collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Prefilter => f.write_str("prefilter"),
            m => write!(f, "{}-{}", m.family(), m.backend_name()),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prefilter" => return Ok(Method::Prefilter),
            "fcvi" => return Ok(Method::Fcvi(BackendKind::Hnsw)),
            "postfilter" => return Ok(Method::Postfilter(BackendKind::Hnsw)),
            _ => {}
        }
        let unknown = || Error::UnknownMethod(s.to_string());
        let (family, backend) = s.split_once('-').ok_or_else(unknown)?;
        let backend: BackendKind = backend.parse().map_err(|_| unknown())?;
        match family {
            "fcvi" => Ok(Method::Fcvi(backend)),
            "postfilter" => Ok(Method::Postfilter(backend)),
            _ => Err(unknown()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchParams {
    pub search: SearchParams,
    pub fcvi: FcviConfig,
    pub hnsw: HnswParams,
    pub oversample: usize,
    pub seed: u64,
    pub warmup: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            search: SearchParams::default(),
            fcvi: FcviConfig::partition(1.0),
            hnsw: HnswParams::default(),
            oversample: DEFAULT_OVERSAMPLE,
            seed: 0,
            warmup: WARMUP_QUERIES,
        }
    }
}

impl BenchParams {
    fn backend(&self, kind: BackendKind) -> BackendConfig {
        match kind {
            BackendKind::BruteForce => BackendConfig::brute_force(),
            BackendKind::Hnsw => BackendConfig::hnsw(self.hnsw, self.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub backend: String,
    pub recall_at_k: f64,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub qps: f64,
    pub build_s: f64,
    pub index_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub records: usize,
    pub queries: usize,
    pub k: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<ReportRow>,
    pub environment: Environment,
}

pub const CSV_HEADER: &str = "method,backend,recall_at_k,mean_ms,median_ms,p95_ms,qps,build_s,index_bytes";

impl BenchReport {
    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method.family() && r.backend == method.backend_name())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.method, r.backend, r.recall_at_k, r.mean_ms, r.median_ms, r.p95_ms, r.qps, r.build_s, r.index_bytes
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A built method ready to answer queries.
#[derive(Debug, Clone)]
pub enum Engine {
    Fcvi(FcviIndex),
    Prefilter(RecordStore),
    Postfilter(RecordStore, PostfilterIndex),
}

impl Engine {
    pub fn build(method: Method, store: &RecordStore, params: &BenchParams) -> Result<Self> {
        Ok(match method {
            Method::Fcvi(kind) => Engine::Fcvi(FcviIndex::build(
                store.clone(),
                params.fcvi.clone(),
                params.backend(kind),
            )?),
            Method::Prefilter => Engine::Prefilter(store.clone()),
            Method::Postfilter(kind) => {
                let ann = PostfilterIndex::build(store, params.backend(kind))?;
                Engine::Postfilter(store.clone(), ann)
            }
        })
    }

    pub fn store(&self) -> &RecordStore {
        match self {
            Engine::Fcvi(idx) => idx.store(),
            Engine::Prefilter(s) | Engine::Postfilter(s, _) => s,
        }
    }

    pub fn run(&self, query: &Query, params: &BenchParams) -> Result<Vec<u32>> {
        let hits = match self {
            Engine::Fcvi(idx) => idx.query(&query.vector, &query.filter, &params.search)?.hits,
            Engine::Prefilter(store) => prefilter_search(store, &query.vector, &query.filter, &params.search)?,
            Engine::Postfilter(store, ann) => postfilter_search(
                store,
                ann,
                &query.vector,
                &query.filter,
                &params.search,
                params.oversample,
            )?,
        };
        Ok(hits.into_iter().map(|h| h.id).collect())
    }

    pub fn insert(&mut self, v: &[f32], f: &[f32]) -> Result<u32> {
        match self {
            Engine::Fcvi(idx) => idx.insert(v, f),
            Engine::Prefilter(store) => store.push(v, f),
            Engine::Postfilter(store, ann) => {
                let id = store.push(v, f)?;
                ann.insert(store, id)?;
                Ok(id)
            }
        }
    }

    pub fn memory_bytes(&self) -> usize {
        match self {
            Engine::Fcvi(idx) => idx.memory_bytes(),
            Engine::Prefilter(_) => 0,
            Engine::Postfilter(_, ann) => ann.memory_bytes(),
        }
    }
}

/// Oracle top-k for each query against `store`.
pub fn oracle_ids(store: &RecordStore, queries: &[Query], params: &BenchParams) -> Result<Vec<Vec<u32>>> {
    queries
        .iter()
        .map(|q| {
            oracle_for_query(
                store,
                &q.vector,
                &q.filter,
                params.search.probes,
                params.search.lambda,
                params.search.k,
            )
        })
        .collect()
}

/// Times `engine` over the query stream and scores it against `oracle`.
pub fn measure(
    method: Method,
    engine: &Engine,
    queries: &[Query],
    oracle: &[Vec<u32>],
    params: &BenchParams,
    build_s: f64,
) -> Result<ReportRow> {
    if queries.is_empty() {
        return Err(Error::InvalidParameter("empty query stream".into()));
    }
    for q in queries.iter().cycle().take(params.warmup) {
        engine.run(q, params)?;
    }
    let mut latencies = Vec::with_capacity(queries.len());
    let mut recall = 0.0;
    let wall = Instant::now();
    for (q, truth) in queries.iter().zip(oracle) {
        let t = Instant::now();
        let ids = engine.run(q, params)?;
        latencies.push(t.elapsed().as_secs_f64() * 1e3);
        recall += recall_at_k(&ids, truth);
    }
    let total = wall.elapsed().as_secs_f64();
    let mean = latencies.iter().sum::<f64>() / latencies.len() as f64;
    latencies.sort_by(f64::total_cmp);
    Ok(ReportRow {
        method: method.family().into(),
        backend: method.backend_name().into(),
        recall_at_k: recall / queries.len() as f64,
        mean_ms: mean,
        median_ms: percentile(&latencies, 0.5),
        p95_ms: percentile(&latencies, 0.95),
        qps: queries.len() as f64 / total.max(f64::MIN_POSITIVE),
        build_s,
        index_bytes: engine.memory_bytes() as u64,
    })
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn environment(records: usize, queries: usize, params: &BenchParams) -> Environment {
    Environment {
        os: std::env::consts::OS.into(),
        arch: std::env::consts::ARCH.into(),
        threads: 1,
        records,
        queries,
        k: params.search.k,
        lambda: params.search.lambda,
    }
}

/// Builds every method over `dataset` and measures it on `queries`.
pub fn run_benchmark(
    dataset: &Dataset,
    queries: &[Query],
    methods: &[Method],
    params: &BenchParams,
) -> Result<BenchReport> {
    let store = RecordStore::new(dataset.schema.clone(), dataset.d, dataset.vectors.clone(), dataset.filters.clone())?;
    let oracle = oracle_ids(&store, queries, params)?;
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let t = Instant::now();
        let engine = Engine::build(method, &store, params)?;
        let build_s = t.elapsed().as_secs_f64();
        rows.push(measure(method, &engine, queries, &oracle, params, build_s)?);
    }
    Ok(BenchReport {
        rows,
        environment: environment(store.live_len(), queries.len(), params),
    })
}
