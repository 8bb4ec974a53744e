//! Concurrent history recording.
//!
//! Each worker runs its script against a shared map and stamps every
//! operation with invoke and return sequence numbers drawn from one global
//! counter, which gives a real-time partial order the checker can use.

use std::sync::atomic::{AtomicU64, Ordering::SeqCst};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vlist::{Key, MapHandle, Value, VersionedMap};

use crate::oracle::{Op, Outcome};

/// One completed operation in a recorded history.
#[derive(Clone, Debug)]
pub struct Completed {
    pub thread: usize,
    pub op: Op,
    pub outcome: Outcome,
    pub invoked: u64,
    pub returned: u64,
}

fn run_op(h: &mut MapHandle, op: &Op, buf: &mut Vec<(Key, Value)>) -> Outcome {
    match *op {
        Op::Insert(k, v) => Outcome::Val(h.insert(k, v)),
        Op::Remove(k) => Outcome::Val(h.remove(k)),
        Op::Contains(k) => Outcome::Val(h.contains(k)),
        Op::Range(low, high) => {
            h.range_query(low, high, buf);
            Outcome::Entries(buf.clone())
        }
    }
}

/// Executes one script per thread concurrently and returns the merged
/// history sorted by invocation order.
pub fn record_history(map: &VersionedMap, scripts: &[Vec<Op>]) -> Vec<Completed> {
    let seq = AtomicU64::new(0);
    let mut merged: Vec<Completed> = Vec::new();
    std::thread::scope(|s| {
        let mut joins = Vec::new();
        for (tid, script) in scripts.iter().enumerate() {
            let seq = &seq;
            joins.push(s.spawn(move || {
                let mut h = map.handle();
                let mut buf = Vec::new();
                let mut log = Vec::with_capacity(script.len());
                for op in script {
                    let invoked = seq.fetch_add(1, SeqCst);
                    let outcome = run_op(&mut h, op, &mut buf);
                    let returned = seq.fetch_add(1, SeqCst);
                    log.push(Completed { thread: tid, op: op.clone(), outcome, invoked, returned });
                }
                log
            }));
        }
        for j in joins {
            merged.extend(j.join().unwrap());
        }
    });
    merged.sort_by_key(|c| c.invoked);
    merged
}

/// Deterministic random scripts for small-history checking. Values encode
/// (thread, step) so every insert writes a distinct value.
pub fn random_scripts(seed: u64, threads: usize, total_ops: usize, key_range: Key) -> Vec<Vec<Op>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut scripts = vec![Vec::new(); threads];
    for i in 0..total_ops {
        let t = i % threads;
        let k: Key = rng.gen_range(1..=key_range);
        let op = match rng.gen_range(0..10) {
            0..=3 => Op::Insert(k, (t as Value + 1) * 1000 + i as Value),
            4..=6 => Op::Remove(k),
            7..=8 => Op::Contains(k),
            _ => Op::Range(k, (k + rng.gen_range(0..=4)).min(key_range)),
        };
        scripts[t].push(op);
    }
    scripts
}
