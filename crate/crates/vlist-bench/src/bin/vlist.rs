//! Command line front end: `bench` runs timed workloads, `verify` runs the
//! correctness suites with machine-readable JSON-lines verdicts.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use vlist::{IndexChoice, Key};
use vlist_bench::report::{csv_row, summary, CSV_HEADER};
use vlist_bench::{run_benchmark, Mix, WorkloadSpec};
use vlist_verify::probe::probe_structure;
use vlist_verify::stress::{
    check_random_history_with, crafted_reject_histories, run_forced_reuse,
    run_oracle_equivalence,
};
use vlist_verify::check_linearizable;

#[derive(Copy, Clone, Debug, ValueEnum)]
enum IndexArg {
    None,
    Skiplist,
}

impl From<IndexArg> for IndexChoice {
    fn from(a: IndexArg) -> IndexChoice {
        match a {
            IndexArg::None => IndexChoice::None,
            IndexArg::Skiplist => IndexChoice::SkipList,
        }
    }
}

#[derive(Parser)]
#[command(name = "vlist", about = "Versioned lock-free map: benchmarks and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a fixed-time mixed workload and report throughput.
    Bench(BenchArgs),
    /// Run a correctness suite; exits nonzero on any failed check.
    Verify {
        #[command(subcommand)]
        suite: VerifyCommand,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long = "duration-s", default_value_t = 2.0)]
    duration_s: f64,
    #[arg(long = "key-range", default_value_t = 65536)]
    key_range: Key,
    /// Percentages insert:remove:contains:rangequery, summing to 100.
    #[arg(long, default_value = "25:25:40:10")]
    mix: Mix,
    #[arg(long = "rq-size", default_value_t = 256)]
    rq_size: Key,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = IndexArg::None)]
    index: IndexArg,
    /// Dedicated threads running only range queries, in addition to
    /// --threads.
    #[arg(long = "rq-threads", default_value_t = 0)]
    rq_threads: usize,
    /// Append one CSV row (with header on creation) to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Node pool size override.
    #[arg(long = "pool-slots")]
    pool_slots: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    threads: usize,
    #[arg(long, default_value_t = 10_000)]
    ops: usize,
    #[arg(long = "key-range", default_value_t = 256)]
    key_range: Key,
    #[arg(long, value_enum, default_value_t = IndexArg::None)]
    index: IndexArg,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Replay single-threaded random scripts against the sequential oracle.
    Oracle(VerifyArgs),
    /// Record concurrent histories and check linearizability.
    Linearize {
        #[command(flatten)]
        common: VerifyArgs,
        /// Number of histories; each uses --ops operations.
        #[arg(long, default_value_t = 100)]
        histories: u64,
    },
    /// Run churn, then probe structural invariants at quiescence.
    Probe(VerifyArgs),
    /// Forced-reuse stress with shadow-log auditing.
    Audit(VerifyArgs),
}

fn emit(line: serde_json::Value) {
    println!("{line}");
}

fn run_bench(args: &BenchArgs) -> Result<(), String> {
    let spec = WorkloadSpec {
        threads: args.threads,
        duration: Duration::from_secs_f64(args.duration_s),
        key_range: args.key_range,
        mix: args.mix,
        rq_size: args.rq_size,
        seed: args.seed,
        index: args.index.into(),
        rq_threads: args.rq_threads,
        pool_slots: args.pool_slots,
    };
    let report = run_benchmark(&spec)?;
    println!("{}", summary(&spec, &report));
    if let Some(path) = &args.csv {
        let new_file = !path.exists();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| format!("cannot open {}: {e}", path.display()))?;
        if new_file {
            writeln!(f, "{CSV_HEADER}").map_err(|e| e.to_string())?;
        }
        writeln!(f, "{}", csv_row(&spec, &report)).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run_verify(suite: &VerifyCommand) -> bool {
    let mut ok = true;
    match suite {
        VerifyCommand::Oracle(a) => {
            match run_oracle_equivalence(a.seed, a.ops, a.key_range, a.index.into()) {
                Ok(n) => emit(json!({
                    "check": "oracle", "seed": a.seed, "ops": n, "verdict": "pass"
                })),
                Err(e) => {
                    ok = false;
                    emit(json!({
                        "check": "oracle", "seed": a.seed, "verdict": "fail", "detail": e
                    }));
                }
            }
        }
        VerifyCommand::Linearize { common: a, histories } => {
            let ops_per_history = a.ops.clamp(2, 40);
            for i in 0..*histories {
                let seed = a.seed + i;
                let threads = 2 + (i as usize % a.threads.clamp(2, 4).saturating_sub(1));
                match check_random_history_with(
                    seed,
                    threads,
                    ops_per_history,
                    a.key_range.clamp(8, 16),
                    a.index.into(),
                ) {
                    Ok(()) => emit(json!({
                        "check": "linearize", "seed": seed, "verdict": "accept"
                    })),
                    Err(e) => {
                        ok = false;
                        emit(json!({
                            "check": "linearize", "seed": seed, "verdict": "reject", "detail": e
                        }));
                    }
                }
            }
            for (i, h) in crafted_reject_histories().iter().enumerate() {
                let rejected = !check_linearizable(h);
                if !rejected {
                    ok = false;
                }
                emit(json!({
                    "check": "negative-control", "case": i,
                    "verdict": if rejected { "reject" } else { "accept" },
                    "expected": "reject"
                }));
            }
        }
        VerifyCommand::Probe(a) => {
            let mut cfg = vlist::MapConfig::for_key_range(a.key_range as usize, a.threads);
            cfg.index = a.index.into();
            let map = vlist::VersionedMap::new(cfg).unwrap();
            std::thread::scope(|s| {
                for t in 0..a.threads {
                    let map = &map;
                    let per_thread = a.ops / a.threads.max(1);
                    let seed = a.seed;
                    let key_range = a.key_range;
                    s.spawn(move || {
                        use rand::{Rng, SeedableRng};
                        let mut rng = rand::rngs::StdRng::seed_from_u64(seed + t as u64);
                        let mut h = map.handle();
                        let mut out = Vec::new();
                        for _ in 0..per_thread {
                            let k: Key = rng.gen_range(1..=key_range);
                            match rng.gen_range(0..8) {
                                0..=3 => {
                                    h.insert(k, rng.gen_range(1..=u64::MAX));
                                }
                                4..=6 => {
                                    h.remove(k);
                                }
                                _ => {
                                    h.range_query(1, key_range, &mut out);
                                }
                            }
                        }
                    });
                }
            });
            match probe_structure(&map) {
                Ok(()) => emit(json!({"check": "probe", "seed": a.seed, "verdict": "pass"})),
                Err(e) => {
                    ok = false;
                    emit(json!({
                        "check": "probe", "seed": a.seed, "verdict": "fail", "detail": e
                    }));
                }
            }
        }
        VerifyCommand::Audit(a) => {
            for cap in [1usize, 64] {
                match run_forced_reuse(cap, a.threads, a.ops) {
                    Ok(r) => emit(json!({
                        "check": "audit", "batch_capacity": cap, "verdict": "pass",
                        "stale_reads": r.stale_reads,
                        "lifetime_overlaps": r.lifetime_overlaps,
                        "peak_retired": r.peak_retired_unreclaimed,
                        "epoch_advances": r.epoch_advances
                    })),
                    Err(e) => {
                        ok = false;
                        emit(json!({
                            "check": "audit", "batch_capacity": cap,
                            "verdict": "fail", "detail": e
                        }));
                    }
                }
            }
        }
    }
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Bench(args) => match run_bench(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Verify { suite } => {
            if run_verify(&suite) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
