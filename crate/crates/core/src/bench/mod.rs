//! Synthetic workloads, exhaustive ground truth, and the benchmark and
//! distribution-shift harness.

pub mod oracle;
pub mod runner;
pub mod shift;
pub mod workload;

pub use oracle::{exhaustive_oracle, oracle_for_query, recall_at_k};
pub use runner::{run_benchmark, BenchParams, BenchReport, Engine, Method, ReportRow, CSV_HEADER};
pub use shift::{run_shift_scenario, ShiftDelta, ShiftReport};
pub use workload::{gen_synthetic, Dataset, Generator, Query, Shift, Workload, WorkloadSpec};
