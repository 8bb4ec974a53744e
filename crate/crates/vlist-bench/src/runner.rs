//! The timed benchmark loop.

use std::sync::atomic::{AtomicBool, Ordering::SeqCst};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlist::{Key, MapConfig, VersionedMap};

use crate::report::BenchReport;
use crate::workload::WorkloadSpec;

#[derive(Clone, Copy, Default)]
struct Counters {
    inserts: u64,
    removes: u64,
    contains: u64,
    ranges: u64,
}

/// Builds a map sized for the spec, prefills half the key range with
/// distinct random keys, runs the timed mixed workload, and aggregates the
/// per-thread counters into a report.
pub fn run_benchmark(spec: &WorkloadSpec) -> Result<BenchReport, String> {
    spec.validate()?;
    let workers = spec.total_threads();
    let mut cfg = MapConfig::for_key_range(spec.key_range as usize, workers);
    cfg.index = spec.index;
    cfg.seed = spec.seed;
    if let Some(slots) = spec.pool_slots {
        cfg.pool_slots = slots;
    }
    let map = VersionedMap::new(cfg).map_err(|e| e.to_string())?;

    let mut prefill_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut keys: Vec<Key> = (1..=spec.key_range).collect();
    keys.shuffle(&mut prefill_rng);
    keys.truncate(spec.key_range as usize / 2);
    // Descending order keeps each prefill insert adjacent to the head, so
    // filling large key ranges is linear even without an index.
    keys.sort_unstable_by(|a, b| b.cmp(a));
    {
        let mut h = map.handle();
        for k in keys {
            h.insert(k, prefill_rng.gen_range(1..=u64::MAX));
        }
    }

    let stop = AtomicBool::new(false);
    let started = Instant::now();
    let mut totals = Counters::default();
    std::thread::scope(|s| {
        let mut joins = Vec::new();
        for t in 0..workers {
            let map = &map;
            let stop = &stop;
            let range_only = t >= spec.threads;
            joins.push(s.spawn(move || {
                let mut h = map.handle();
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(t as u64 + 1);
                let mut out = Vec::new();
                let mut c = Counters::default();
                while !stop.load(SeqCst) {
                    let k: Key = rng.gen_range(1..=spec.key_range);
                    let class = if range_only { 100 } else { rng.gen_range(0..100) };
                    if class < spec.mix.insert {
                        h.insert(k, rng.gen_range(1..=u64::MAX));
                        c.inserts += 1;
                    } else if class < spec.mix.insert + spec.mix.remove {
                        h.remove(k);
                        c.removes += 1;
                    } else if class < spec.mix.insert + spec.mix.remove + spec.mix.contains {
                        h.contains(k);
                        c.contains += 1;
                    } else {
                        let low = rng.gen_range(1..=spec.key_range);
                        let high = (low + spec.rq_size - 1).min(spec.key_range);
                        h.range_query(low, high, &mut out);
                        c.ranges += 1;
                    }
                }
                c
            }));
        }
        std::thread::sleep(spec.duration);
        stop.store(true, SeqCst);
        for j in joins {
            let c = j.join().unwrap();
            totals.inserts += c.inserts;
            totals.removes += c.removes;
            totals.contains += c.contains;
            totals.ranges += c.ranges;
        }
    });
    let elapsed = started.elapsed();

    let stats = map.stats();
    let total_ops = totals.inserts + totals.removes + totals.contains + totals.ranges;
    Ok(BenchReport {
        inserts: totals.inserts,
        removes: totals.removes,
        contains: totals.contains,
        range_queries: totals.ranges,
        total_ops,
        throughput: total_ops as f64 / elapsed.as_secs_f64(),
        elapsed,
        rollbacks: stats.rollbacks,
        epoch_advances: stats.pool.epoch_advances,
        peak_retired: stats.pool.peak_retired_unreclaimed,
    })
}
