//! Fixed-time microbenchmark harness for the versioned map.

pub mod report;
pub mod runner;
pub mod workload;

pub use report::BenchReport;
pub use runner::run_benchmark;
pub use workload::{Mix, WorkloadSpec};
