//! Flag definitions. Every field is optional so a `--config` JSON document
//! can supply it; flags given on the command line win.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Usage;

#[derive(Debug, Parser)]
#[command(name = "fcvi", version, about = "Filtered vector search through a single transformed ANN index")]
pub struct Cli {
    /// JSON file with values for the subcommand's flags (snake_case keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with queries.
    Gen(GenArgs),
    /// Build and save an index over a dataset.
    Build(BuildArgs),
    /// Describe a dataset or index file.
    Info(InfoArgs),
    /// Run one filtered query; hits go to stdout as JSON lines.
    Query(QueryArgs),
    /// Benchmark FCVI against pre- and post-filtering.
    Bench(BenchArgs),
    /// Run the randomized property suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: Option<u64>,
    /// Number of filter attributes.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub clusters: Option<u64>,
    #[arg(long)]
    pub selectivity: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub queries: Option<u64>,
    #[arg(long)]
    pub correlation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildArgs {
    /// Dataset container written by `gen`.
    #[arg(long, conflicts_with_all = ["vectors", "attributes", "schema"])]
    pub data: Option<PathBuf>,
    /// fvecs file of raw vectors (with --attributes and --schema).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// partition | cluster | embedding
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Filter cluster count for the cluster variant.
    #[arg(long)]
    pub clusters_k: Option<usize>,
    /// fvecs file holding W (d rows of m values) for the embedding variant.
    #[arg(long)]
    pub projection: Option<PathBuf>,
    /// bf | hnsw
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub hnsw_m: Option<usize>,
    #[arg(long)]
    pub ef_construction: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoArgs {
    /// Index or dataset container.
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// fvecs file holding the query vector.
    #[arg(long)]
    pub vector_file: Option<PathBuf>,
    /// Row of the vector file to use.
    #[arg(long)]
    pub row: Option<usize>,
    /// Predicates, e.g. `price:50..100,cat=b,color in {red,blue}`.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Probes per range predicate.
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub ef_search: Option<usize>,
    /// fcvi | prefilter
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchArgs {
    /// Dataset container written by `gen`; its generator settings are reused.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub queries: Option<u64>,
    #[arg(long)]
    pub selectivity: Option<f64>,
    /// Comma-separated: fcvi-bf,fcvi-hnsw,prefilter,postfilter-bf,postfilter-hnsw
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ef_search: Option<usize>,
    #[arg(long)]
    pub oversample: Option<usize>,
    /// none | filter_shift | vector_shift | query_shift
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; `.json` writes JSON, anything else CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,
    /// Test hook: perturb the transform so every suite fails.
    #[arg(long, hide = true)]
    #[serde(default)]
    pub inject_fault: bool,
}

/// Overlays command-line values on the config document. Absent flags
/// (null, or false for switches) leave config values in place.
pub fn merge<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| Usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(base) = &mut doc else {
        return Err(Usage(format!("config {}: expected a JSON object", path.display())).into());
    };
    if let Value::Object(given) = serde_json::to_value(&flags)? {
        for (key, value) in given {
            if !matches!(value, Value::Null | Value::Bool(false)) {
                base.insert(key, value);
            }
        }
    }
    serde_json::from_value(doc).map_err(|e| Usage(format!("config {}: {e}", path.display())).into())
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Usage(format!("--{flag} is required")).into())
}
