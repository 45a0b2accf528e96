use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use fcvi::bench::{gen_synthetic, run_benchmark, run_shift_scenario, BenchParams, BenchReport, Method, Shift, WorkloadSpec};
use fcvi::engine::{prefilter_search, FcviConfig, FcviIndex, RecordStore, SearchParams, DEFAULT_OVERSAMPLE};
use fcvi::index::hnsw::{DEFAULT_EF_CONSTRUCTION, DEFAULT_M};
use fcvi::index::{BackendConfig, BackendKind, HnswParams, VectorIndex};
use fcvi::storage::{
    attributes_to_csv, inspect, load_dataset, load_fvecs, load_index, load_records, save_dataset, save_fvecs,
    save_index, FLAG_GRAPH,
};
use fcvi::transform::{FilterSchema, Projection, QueryFilter, Variant};
use fcvi::verify::{run_suites, VerifyOptions};
use serde_json::json;

use crate::args::{merge, required, BenchArgs, BuildArgs, GenArgs, InfoArgs, QueryArgs, VerifyArgs};
use crate::{Usage, EXIT_FAILURE};

pub const DATASET_FILE: &str = "dataset.fcvi";
pub const DEFAULT_VERIFY_TRIALS: u64 = 10_000;
pub const DEFAULT_VERIFY_SEED: u64 = 42;
const ALL_METHODS: &str = "fcvi-bf,fcvi-hnsw,prefilter,postfilter-bf,postfilter-hnsw";

fn log_resolved(command: &str, value: &serde_json::Value) {
    log::info!("{command}: resolved config {value}");
}

pub fn gen(a: GenArgs, config: Option<&Path>) -> Result<u8> {
    let a = merge(a, config)?;
    let def = WorkloadSpec::default();
    let spec = WorkloadSpec {
        n: a.n.map_or(def.n, |x| x as usize),
        d: a.d.map_or(def.d, |x| x as usize),
        m: a.m.map_or(def.m, |x| x as usize),
        clusters: a.clusters.map_or(def.clusters, |x| x as usize),
        selectivity: a.selectivity.unwrap_or(def.selectivity),
        queries: a.queries.map_or(def.queries, |x| x as usize),
        seed: a.seed.unwrap_or(def.seed),
        correlation: a.correlation.unwrap_or(def.correlation),
        ..def
    };
    let out = required(a.out, "out")?;
    log_resolved("gen", &json!({ "spec": spec, "out": out }));
    spec.validate()?;

    let w = gen_synthetic(&spec)?;
    let data = &w.dataset;
    let store = RecordStore::new(data.schema.clone(), data.d, data.vectors.clone(), data.filters.clone())?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    save_dataset(&store, json!({ "generator": spec }), out.join(DATASET_FILE))?;
    save_fvecs(out.join("vectors.fvecs"), data.d, &data.vectors)?;
    fs::write(out.join("attributes.csv"), attributes_to_csv(&data.schema, &data.filters)?)?;
    fs::write(out.join("schema.json"), data.schema.to_json())?;
    let qv: Vec<f32> = w.queries.iter().flat_map(|q| q.vector.iter().copied()).collect();
    save_fvecs(out.join("queries.fvecs"), data.d, &qv)?;
    let filters: String = w.queries.iter().map(|q| format!("{}\n", q.filter)).collect();
    fs::write(out.join("queries.txt"), filters)?;

    println!(
        "{}",
        json!({ "n": data.len(), "d": data.d, "m": data.schema.dim(), "queries": w.queries.len(), "out": out })
    );
    Ok(0)
}

pub fn build(a: BuildArgs, config: Option<&Path>) -> Result<u8> {
    let a = merge(a, config)?;
    let variant: Variant = a.variant.as_deref().unwrap_or("partition").parse()?;
    let alpha = a.alpha.unwrap_or(1.0);
    let kind: BackendKind = a.backend.as_deref().unwrap_or("hnsw").parse()?;
    let seed = a.seed.unwrap_or(0);
    let hnsw = HnswParams {
        m: a.hnsw_m.unwrap_or(DEFAULT_M),
        ef_construction: a.ef_construction.unwrap_or(DEFAULT_EF_CONSTRUCTION),
    };
    let out = required(a.out.clone(), "out")?;
    log_resolved(
        "build",
        &json!({
            "data": a.data, "vectors": a.vectors, "attributes": a.attributes, "schema": a.schema,
            "variant": variant, "alpha": alpha, "clusters_k": a.clusters_k, "projection": a.projection,
            "backend": kind, "hnsw": hnsw, "seed": seed, "out": out,
        }),
    );
    if variant == Variant::Cluster && a.clusters_k.is_none() {
        return Err(Usage("--variant cluster requires --clusters-k".into()).into());
    }
    if a.projection.is_some() && variant != Variant::Embedding {
        return Err(Usage("--projection only applies to --variant embedding".into()).into());
    }
    if !(alpha >= 1.0) {
        return Err(fcvi::Error::AlphaTooSmall(alpha).into());
    }

    let store = match &a.data {
        Some(path) => load_dataset(path)?.0,
        None => {
            let schema_path = required(a.schema.as_ref(), "schema (or --data)")?;
            let schema = FilterSchema::from_json(&fs::read_to_string(schema_path)?)?;
            load_records(
                required(a.vectors.as_ref(), "vectors")?,
                required(a.attributes.as_ref(), "attributes")?,
                schema,
            )?
        }
    };
    let projection = match &a.projection {
        Some(path) => {
            let w = load_fvecs(path)?;
            let data = w.data.iter().map(|&x| x as f64).collect();
            Some(Projection::new(w.len(), w.dim, data)?)
        }
        None => None,
    };
    let config = FcviConfig {
        variant,
        alpha,
        clusters: a.clusters_k,
        projection,
        seed,
    };
    let backend = match kind {
        BackendKind::BruteForce => BackendConfig::brute_force(),
        BackendKind::Hnsw => BackendConfig::hnsw(hnsw, seed),
    };
    let t = Instant::now();
    let index = FcviIndex::build(store, config, backend)?;
    let build_s = t.elapsed().as_secs_f64();
    save_index(&index, &out)?;
    println!(
        "{}",
        json!({ "n": index.len(), "backend": kind.short_name(), "build_s": build_s, "out": out })
    );
    Ok(0)
}

pub fn info(a: InfoArgs, config: Option<&Path>) -> Result<u8> {
    let a = merge(a, config)?;
    let path = required(a.index, "index")?;
    log_resolved("info", &json!({ "index": path }));
    let c = inspect(&path)?;
    let bytes = fs::metadata(&path)?.len();
    let doc = if c.variant_tag == 0 {
        let (store, extra) = load_dataset(&path)?;
        json!({
            "kind": "dataset", "n": store.len(), "live": store.live_len(), "d": store.dim(),
            "m": store.filter_dim(), "attributes": store.schema().attributes().len(),
            "generator": extra.get("generator"), "file_bytes": bytes,
        })
    } else {
        let index = load_index(&path)?;
        json!({
            "kind": "index", "n": c.n, "live": index.len(), "d": c.d, "m": c.m, "padded_dim": c.padded_dim,
            "variant": index.transform().variant, "alpha": c.alpha,
            "backend": index.backend().kind().short_name(), "backend_size": index.backend().len(),
            "graph_stored": c.flags & FLAG_GRAPH != 0, "memory_bytes": index.memory_bytes(), "file_bytes": bytes,
        })
    };
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(0)
}

pub fn query(a: QueryArgs, config: Option<&Path>) -> Result<u8> {
    let a = merge(a, config)?;
    let def = SearchParams::default();
    let params = SearchParams {
        k: a.k.unwrap_or(def.k),
        lambda: a.lambda.unwrap_or(def.lambda),
        c: a.c.unwrap_or(def.c),
        probes: a.probes.unwrap_or(def.probes),
        ef_search: a.ef_search.unwrap_or(def.ef_search),
    };
    let mode = a.mode.clone().unwrap_or_else(|| "fcvi".into());
    let index_path = required(a.index, "index")?;
    let vector_path = required(a.vector_file, "vector-file")?;
    let row = a.row.unwrap_or(0);
    log_resolved(
        "query",
        &json!({
            "index": index_path, "vector_file": vector_path, "row": row, "filter": a.filter,
            "params": params, "mode": mode,
        }),
    );
    let qf = match a.filter.as_deref() {
        Some(text) => text.parse::<QueryFilter>()?,
        None => QueryFilter::new(Vec::new()),
    };
    if mode != "fcvi" && mode != "prefilter" {
        return Err(Usage(format!("unknown mode `{mode}` (expected fcvi or prefilter)")).into());
    }
    if mode == "fcvi" && params.lambda == 0.0 {
        return Err(Usage("lambda = 0 is filter-only scoring; use --mode prefilter".into()).into());
    }

    let index = load_index(&index_path)?;
    let vectors = load_fvecs(&vector_path)?;
    let q = vectors
        .row(row)
        .ok_or_else(|| Usage(format!("--row {row} out of range ({} rows)", vectors.len())))?;
    let hits = if mode == "fcvi" {
        let result = index.query(q, &qf, &params)?;
        if let Some(w) = &result.warning {
            log::warn!("{w}");
        }
        log::info!(
            "k'={} probes={} candidates={}",
            result.k_prime,
            result.probes,
            result.candidates
        );
        result.hits
    } else {
        prefilter_search(index.store(), q, &qf, &params)?
    };
    for hit in hits {
        println!("{}", serde_json::to_string(&hit)?);
    }
    Ok(0)
}

/// Report sanity: every cell present and finite, recall in range.
fn report_ok(report: &BenchReport) -> bool {
    report.rows.iter().all(|r| {
        (0.0..=1.0).contains(&r.recall_at_k)
            && [r.mean_ms, r.median_ms, r.p95_ms, r.qps, r.build_s]
                .iter()
                .all(|x| x.is_finite() && *x >= 0.0)
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

pub fn bench(a: BenchArgs, config: Option<&Path>) -> Result<u8> {
    let a = merge(a, config)?;
    let mut spec = match &a.data {
        Some(path) => {
            if a.n.is_some() || a.d.is_some() || a.m.is_some() || a.selectivity.is_some() || a.seed.is_some() {
                return Err(Usage("--n/--d/--m/--selectivity/--seed come from the dataset when --data is given".into()).into());
            }
            let (_, extra) = load_dataset(path)?;
            let generator = extra
                .get("generator")
                .cloned()
                .ok_or_else(|| Usage(format!("{} has no generator settings", path.display())))?;
            serde_json::from_value::<WorkloadSpec>(generator).map_err(fcvi::Error::from)?
        }
        None => WorkloadSpec::default(),
    };
    if let Some(n) = a.n {
        spec.n = n as usize;
    }
    if let Some(d) = a.d {
        spec.d = d as usize;
    }
    if let Some(m) = a.m {
        spec.m = m as usize;
    }
    if let Some(q) = a.queries {
        spec.queries = q as usize;
    }
    if let Some(s) = a.selectivity {
        spec.selectivity = s;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    spec.shift = a.scenario.as_deref().unwrap_or("none").parse()?;
    let methods = Method::parse_list(a.methods.as_deref().unwrap_or(ALL_METHODS))?;
    if methods.is_empty() {
        return Err(Usage("--methods is empty".into()).into());
    }
    let mut params = BenchParams {
        seed: spec.seed,
        oversample: a.oversample.unwrap_or(DEFAULT_OVERSAMPLE),
        ..BenchParams::default()
    };
    params.search.k = a.k.unwrap_or(params.search.k);
    params.search.lambda = a.lambda.unwrap_or(params.search.lambda);
    params.search.c = a.c.unwrap_or(params.search.c);
    params.search.ef_search = a.ef_search.unwrap_or(params.search.ef_search);
    params.fcvi = FcviConfig::partition(a.alpha.unwrap_or(1.0));
    let names: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
    log_resolved(
        "bench",
        &json!({ "spec": spec, "methods": names, "params": params, "report": a.report }),
    );
    spec.validate()?;
    params.search.validate()?;

    if spec.shift == Shift::None {
        let w = gen_synthetic(&spec)?;
        let report = run_benchmark(&w.dataset, &w.queries, &methods, &params)?;
        print!("{}", report.to_csv());
        if let Some(path) = &a.report {
            let text = if is_json(path) { report.to_json() } else { report.to_csv() };
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        return Ok(if report_ok(&report) { 0 } else { EXIT_FAILURE });
    }

    let shift = run_shift_scenario(&spec, &methods, &params)?;
    println!("method,backend,recall_before,recall_after,recall_degradation,mean_ms_before,mean_ms_after,latency_increase_pct");
    for d in &shift.deltas {
        println!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.2}",
            d.method,
            d.backend,
            d.recall_before,
            d.recall_after,
            d.recall_degradation,
            d.mean_ms_before,
            d.mean_ms_after,
            d.latency_increase_pct
        );
    }
    if let Some(path) = &a.report {
        if is_json(path) {
            fs::write(path, serde_json::to_string_pretty(&shift)?)?;
        } else {
            fs::write(with_suffix(path, ".before"), shift.before.to_csv())?;
            fs::write(path, shift.after.to_csv())?;
        }
    }
    Ok(if report_ok(&shift.before) && report_ok(&shift.after) { 0 } else { EXIT_FAILURE })
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn verify(a: VerifyArgs, config: Option<&Path>) -> Result<u8> {
    let a = merge(a, config)?;
    let opts = VerifyOptions {
        seed: a.seed.unwrap_or(DEFAULT_VERIFY_SEED),
        trials: a.trials.unwrap_or(DEFAULT_VERIFY_TRIALS) as usize,
        inject_fault: a.inject_fault,
    };
    log_resolved(
        "verify",
        &json!({ "seed": opts.seed, "trials": opts.trials, "inject_fault": opts.inject_fault }),
    );
    if opts.trials == 0 {
        return Err(Usage("--trials must be >= 1".into()).into());
    }
    let results = run_suites(&opts)?;
    let mut passed = 0;
    for r in &results {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        passed += usize::from(r.passed());
        println!(
            "{status} {:<28} trials={} failures={} worst={:.3e}",
            r.name, r.trials, r.failures, r.worst
        );
    }
    println!("{passed}/{} suites passed", results.len());
    Ok(if passed == results.len() { 0 } else { EXIT_FAILURE })
}
