//! Benchmark results and CSV emission.

use std::fmt::Write as _;
use std::time::Duration;

use vlist::IndexChoice;

use crate::workload::WorkloadSpec;

/// Aggregated counters from one run.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub inserts: u64,
    pub removes: u64,
    pub contains: u64,
    pub range_queries: u64,
    pub total_ops: u64,
    pub throughput: f64,
    pub elapsed: Duration,
    pub rollbacks: u64,
    pub epoch_advances: u64,
    pub peak_retired: u64,
}

pub const CSV_HEADER: &str = "threads,rq_threads,duration_s,key_range,mix,rq_size,seed,index,\
inserts,removes,contains,range_queries,total_ops,throughput_ops_s,rollbacks,epoch_advances,peak_retired";

fn index_name(index: IndexChoice) -> &'static str {
    match index {
        IndexChoice::None => "none",
        IndexChoice::SkipList => "skiplist",
    }
}

/// One CSV row: the spec fields followed by the report fields. No averaging
/// happens here; repetition is the caller's concern.
pub fn csv_row(spec: &WorkloadSpec, report: &BenchReport) -> String {
    let mut row = String::new();
    let m = &spec.mix;
    let _ = write!(
        row,
        "{},{},{},{},{}:{}:{}:{},{},{},{},{},{},{},{},{},{:.0},{},{},{}",
        spec.threads,
        spec.rq_threads,
        spec.duration.as_secs_f64(),
        spec.key_range,
        m.insert,
        m.remove,
        m.contains,
        m.range,
        spec.rq_size,
        spec.seed,
        index_name(spec.index),
        report.inserts,
        report.removes,
        report.contains,
        report.range_queries,
        report.total_ops,
        report.throughput,
        report.rollbacks,
        report.epoch_advances,
        report.peak_retired,
    );
    row
}

/// Human-readable one-run summary.
pub fn summary(spec: &WorkloadSpec, report: &BenchReport) -> String {
    format!(
        "{} thread(s){} for {:.2}s: {} ops ({:.0} ops/s) \
         [ins {} rem {} ctn {} rq {}] rollbacks {} epoch+ {} peak-garbage {}",
        spec.threads,
        if spec.rq_threads > 0 {
            format!(" + {} rq thread(s)", spec.rq_threads)
        } else {
            String::new()
        },
        report.elapsed.as_secs_f64(),
        report.total_ops,
        report.throughput,
        report.inserts,
        report.removes,
        report.contains,
        report.range_queries,
        report.rollbacks,
        report.epoch_advances,
        report.peak_retired,
    )
}
