use std::path::Path;
use std::process::{Command, Output};

use fcvi::bench::{gen_synthetic, run_benchmark, BenchParams, Method, WorkloadSpec};
use fcvi::engine::SearchParams;
use fcvi::storage::{load_fvecs, load_index};
use fcvi::transform::QueryFilter;
use serde_json::Value;

fn fcvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcvi"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path) {
    let out = fcvi(&["gen", "--n", "1000", "--d", "32", "--m", "4", "--seed", "7", "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn build(dir: &Path, extra: &[&str]) -> Output {
    let data = dir.join("dataset.fcvi");
    let index = dir.join("index.fcvi");
    let mut args = vec!["build", "--data", s(&data), "--out", s(&index)];
    args.extend_from_slice(extra);
    fcvi(&args)
}

#[test]
fn gen_is_reproducible_and_reloads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    gen(a.path());
    gen(b.path());
    for f in ["dataset.fcvi", "vectors.fvecs", "attributes.csv", "schema.json", "queries.fvecs", "queries.txt"] {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        assert_eq!(x, y, "{f} differs");
    }
    let out = fcvi(&["info", "--index", s(&a.path().join("dataset.fcvi"))]);
    assert_eq!(code(&out), 0);
    let info: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!((info["n"].as_u64(), info["d"].as_u64(), info["m"].as_u64()), (Some(1000), Some(32), Some(4)));

    let bad = fcvi(&["gen", "--m", "0", "--out", s(a.path())]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn build_validation_and_info() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let out = build(dir.path(), &["--alpha", "0.5"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("alpha must be >= 1"), "{}", stderr(&out));
    let out = build(dir.path(), &["--variant", "cluster"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--clusters-k"));

    let out = build(dir.path(), &["--variant", "cluster", "--clusters-k", "8", "--backend", "hnsw"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = fcvi(&["info", "--index", s(&dir.path().join("index.fcvi"))]);
    let info: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(info["backend_size"].as_u64(), Some(1000));
    assert_eq!(info["variant"], "cluster");
}

#[test]
fn query_self_hit_and_parity() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    assert_eq!(code(&build(dir.path(), &["--backend", "bf"])), 0);
    let index_path = dir.path().join("index.fcvi");
    let vectors = dir.path().join("vectors.fvecs");
    let index = load_index(&index_path).unwrap();

    // Record 5's exact filter, read back from the attribute CSV.
    let csv = std::fs::read_to_string(dir.path().join("attributes.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(6).unwrap().split(',').collect();
    let filter: String = header.iter().zip(&row).map(|(h, v)| format!("{h}={v}")).collect::<Vec<_>>().join(",");
    let out = fcvi(&["query", "--index", s(&index_path), "--vector-file", s(&vectors), "--row", "5", "--filter", &filter, "--k", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let hit: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(hit["id"], 5);
    assert_eq!(hit["score"], 1.0);
    for key in ["vector_sim", "filter_sim"] {
        assert!(hit.get(key).is_some());
    }

    // Parity with the library on the generated queries.
    let queries = dir.path().join("queries.fvecs");
    let qv = load_fvecs(&queries).unwrap();
    let filters = std::fs::read_to_string(dir.path().join("queries.txt")).unwrap();
    for (i, f) in filters.lines().enumerate().take(5) {
        let row = i.to_string();
        let out = fcvi(&["query", "--index", s(&index_path), "--vector-file", s(&queries), "--row", &row, "--filter", f, "--k", "7", "--c", "3"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let cli: Vec<u64> = stdout(&out)
            .lines()
            .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_u64().unwrap())
            .collect();
        let p = SearchParams { k: 7, c: 3.0, ..SearchParams::default() };
        let qf: QueryFilter = f.parse().unwrap();
        let lib: Vec<u64> = index.query(qv.row(i).unwrap(), &qf, &p).unwrap().hits.iter().map(|h| h.id as u64).collect();
        assert_eq!(cli, lib);
    }

    let out = fcvi(&["query", "--index", s(&index_path), "--vector-file", s(&vectors), "--lambda", "0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("prefilter"));
    let out = fcvi(&["query", "--index", s(&index_path), "--vector-file", s(&vectors), "--lambda", "0", "--mode", "prefilter", "--filter", &filter]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn bench_reports_and_parity() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let data = dir.path().join("dataset.fcvi");
    let report = dir.path().join("r.csv");
    let out = fcvi(&["bench", "--data", s(&data), "--methods", "fcvi-bf,prefilter", "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().next().unwrap(), fcvi::bench::CSV_HEADER);
    assert_eq!(csv.lines().count(), 3);

    let json = dir.path().join("r.json");
    let out = fcvi(&["bench", "--data", s(&data), "--methods", "fcvi-bf,prefilter", "--scenario", "none", "--report", s(&json)]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let recall = |v: &Value, i: usize| v["rows"][i]["recall_at_k"].as_f64().unwrap();

    // Same spec through the library.
    let spec = WorkloadSpec { n: 1000, d: 32, m: 4, seed: 7, ..WorkloadSpec::default() };
    let w = gen_synthetic(&spec).unwrap();
    let methods = Method::parse_list("fcvi-bf,prefilter").unwrap();
    let lib = run_benchmark(&w.dataset, &w.queries, &methods, &BenchParams { seed: 7, ..BenchParams::default() }).unwrap();
    for (i, row) in lib.rows.iter().enumerate() {
        // serde_json's default float parser may be off by an ulp.
        assert!((recall(&doc, i) - row.recall_at_k).abs() < 1e-12);
        let csv_recall: f64 = csv.lines().nth(i + 1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(csv_recall, row.recall_at_k);
    }

    let out = fcvi(&["bench", "--data", s(&data), "--methods", "fcvi-bf,warp-drive"]);
    assert_eq!(code(&out), 2);
    let out = fcvi(&["bench", "--data", s(&data), "--scenario", "sideways"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_outcomes() {
    let out = fcvi(&["verify", "--trials", "300"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    let suites: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS")).collect();
    assert_eq!(suites.len(), 7);
    assert!(suites.iter().all(|l| l.contains("trials=300")));
    assert_eq!(code(&fcvi(&["verify", "--trials", "0"])), 2);
    let out = fcvi(&["verify", "--trials", "50", "--inject-fault"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn config_files_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"trials": 40, "seed": 3}"#).unwrap();
    let out = fcvi(&["verify", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("trials=40"));
    let out = fcvi(&["verify", "--config", s(&cfg), "--trials", "20"]);
    assert!(stdout(&out).contains("trials=20"));
    std::fs::write(&cfg, r#"{"trials": 40, "colour": "red"}"#).unwrap();
    assert_eq!(code(&fcvi(&["verify", "--config", s(&cfg)])), 2);
    std::fs::write(&cfg, r#"{"trials": 0}"#).unwrap();
    assert_eq!(code(&fcvi(&["verify", "--config", s(&cfg)])), 2);

    assert_eq!(code(&fcvi(&["verify", "--no-such-flag"])), 2);
    assert_eq!(code(&fcvi(&["info", "--index", s(&dir.path().join("missing.fcvi"))])), 3);
    let junk = dir.path().join("junk.fcvi");
    std::fs::write(&junk, b"FCVI\x01\x00\x00\x00garbage").unwrap();
    assert_eq!(code(&fcvi(&["info", "--index", s(&junk)])), 3);

    // The resolved config is logged.
    let log = Command::new(env!("CARGO_BIN_EXE_fcvi"))
        .args(["verify", "--trials", "5"])
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8(log.stderr).unwrap().contains("resolved config"));
}
