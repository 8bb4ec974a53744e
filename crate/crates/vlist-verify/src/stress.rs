//! Stress drivers shared by the verification CLI and the acceptance suite.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering::SeqCst};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vlist::{
    FastIndex, IndexChoice, Key, MapConfig, NodeRef, Value, VersionedMap, NO_VAL,
};

use crate::audit::{audit_shadow, AuditReport};
use crate::checker::check_linearizable;
use crate::history::{random_scripts, record_history, Completed};
use crate::oracle::{Op, Outcome, OracleMap};

/// Replays a random single-threaded script on the map and the oracle in
/// lockstep, comparing every result. Returns the number of operations.
pub fn run_oracle_equivalence(
    seed: u64,
    total_ops: usize,
    key_range: Key,
    index: IndexChoice,
) -> Result<usize, String> {
    let mut cfg = MapConfig::for_key_range(key_range as usize, 1);
    cfg.index = index;
    cfg.seed = seed;
    let map = VersionedMap::new(cfg).map_err(|e| e.to_string())?;
    let mut h = map.handle();
    let mut oracle = OracleMap::new();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut buf = Vec::new();
    for i in 0..total_ops {
        let k: Key = rng.gen_range(1..=key_range);
        let op = match rng.gen_range(0..10) {
            0..=3 => Op::Insert(k, rng.gen_range(1..=u64::MAX)),
            4..=6 => Op::Remove(k),
            7..=8 => Op::Contains(k),
            _ => Op::Range(k, (k + rng.gen_range(0..=16)).min(key_range)),
        };
        let got: Outcome = match op {
            Op::Insert(k, v) => Outcome::Val(h.insert(k, v)),
            Op::Remove(k) => Outcome::Val(h.remove(k)),
            Op::Contains(k) => Outcome::Val(h.contains(k)),
            Op::Range(low, high) => {
                h.range_query(low, high, &mut buf);
                Outcome::Entries(buf.clone())
            }
        };
        let want = oracle.apply(&op);
        if got != want {
            return Err(format!(
                "op {i} ({op:?}) diverged from the oracle: got {got:?}, want {want:?}"
            ));
        }
    }
    Ok(total_ops)
}

/// Records one random concurrent history on a real map and checks it,
/// drawing thread count, length, and key range from the seed.
pub fn check_random_history(seed: u64, index: IndexChoice) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let threads = rng.gen_range(2..=4);
    let total_ops = rng.gen_range(10..=40);
    let key_range: Key = rng.gen_range(8..=16);
    check_random_history_with(seed, threads, total_ops, key_range, index)
}

/// Same check with the history shape fixed by the caller.
pub fn check_random_history_with(
    seed: u64,
    threads: usize,
    total_ops: usize,
    key_range: Key,
    index: IndexChoice,
) -> Result<(), String> {
    let mut cfg = MapConfig::for_key_range(key_range as usize, threads);
    cfg.index = index;
    let map = VersionedMap::new(cfg).map_err(|e| e.to_string())?;
    let scripts = random_scripts(seed, threads, total_ops, key_range);
    let history = record_history(&map, &scripts);
    if check_linearizable(&history) {
        Ok(())
    } else {
        Err(format!("history for seed {seed} is not linearizable: {history:#?}"))
    }
}

/// Histories a correct implementation cannot produce; the checker must
/// reject both. The first shows a deletion double-claimed (a remove that
/// linearizes at its mark instead of the unlink lets two removers both
/// return the value). The second shows a lost insert (skipping the freeze
/// step lets an excision swallow a concurrent insert).
pub fn crafted_reject_histories() -> [Vec<Completed>; 2] {
    let ev = |thread, op, outcome, invoked, returned| Completed {
        thread,
        op,
        outcome,
        invoked,
        returned,
    };
    let double_claim = vec![
        ev(0, Op::Insert(5, 10), Outcome::Val(NO_VAL), 0, 1),
        ev(0, Op::Remove(5), Outcome::Val(10), 2, 5),
        ev(1, Op::Remove(5), Outcome::Val(10), 3, 4),
    ];
    let lost_insert = vec![
        ev(0, Op::Insert(5, 10), Outcome::Val(NO_VAL), 0, 1),
        ev(0, Op::Remove(5), Outcome::Val(10), 2, 3),
        ev(1, Op::Insert(7, 20), Outcome::Val(NO_VAL), 4, 5),
        ev(1, Op::Contains(7), Outcome::Val(NO_VAL), 6, 7),
    ];
    [double_claim, lost_insert]
}

/// Ping-pong range-snapshot stress result.
#[derive(Clone, Copy, Debug, Default)]
pub struct PingPongReport {
    pub queries: u64,
    /// Range results showing both keys of the exclusive pair.
    pub saw_both: u64,
    /// Range results showing neither key of the covering pair.
    pub saw_neither: u64,
}

/// Two writers, four readers. Writer one ping-pongs keys {1, 2} with
/// remove-before-insert, so a consistent snapshot can never hold both.
/// Writer two ping-pongs keys {11, 12} with insert-before-remove, so a
/// consistent snapshot can never hold neither. Every reader runs full-range
/// queries and tallies violations; a correct map reports zero of each.
pub fn run_ping_pong(duration: Duration, index: IndexChoice) -> PingPongReport {
    let mut cfg = MapConfig::for_key_range(64, 8);
    cfg.index = index;
    let map = VersionedMap::new(cfg).unwrap();
    {
        let mut h = map.handle();
        h.insert(1, 100);
        h.insert(11, 1100);
    }
    let stop = AtomicBool::new(false);
    let queries = AtomicU64::new(0);
    let saw_both = AtomicU64::new(0);
    let saw_neither = AtomicU64::new(0);
    std::thread::scope(|s| {
        let map = &map;
        let stop = &stop;
        s.spawn(move || {
            let mut h = map.handle();
            while !stop.load(SeqCst) {
                h.remove(1);
                h.insert(2, 200);
                h.remove(2);
                h.insert(1, 100);
            }
        });
        s.spawn(move || {
            let mut h = map.handle();
            while !stop.load(SeqCst) {
                h.insert(12, 1200);
                h.remove(11);
                h.insert(11, 1100);
                h.remove(12);
            }
        });
        for _ in 0..4 {
            let queries = &queries;
            let saw_both = &saw_both;
            let saw_neither = &saw_neither;
            s.spawn(move || {
                let mut h = map.handle();
                let mut out = Vec::new();
                while !stop.load(SeqCst) {
                    h.range_query(1, 20, &mut out);
                    queries.fetch_add(1, SeqCst);
                    let has = |k: Key| out.iter().any(|e| e.0 == k);
                    if has(1) && has(2) {
                        saw_both.fetch_add(1, SeqCst);
                    }
                    if !has(11) && !has(12) {
                        saw_neither.fetch_add(1, SeqCst);
                    }
                }
            });
        }
        std::thread::sleep(duration);
        stop.store(true, SeqCst);
    });
    PingPongReport {
        queries: queries.load(SeqCst),
        saw_both: saw_both.load(SeqCst),
        saw_neither: saw_neither.load(SeqCst),
    }
}

/// Forced-reuse churn on a deliberately starved pool, with shadow logging.
/// `batch_capacity` of 1 recycles a slot on every retire; 64 exercises the
/// production batch path.
pub fn run_forced_reuse(
    batch_capacity: usize,
    threads: usize,
    total_ops: usize,
) -> Result<AuditReport, String> {
    let key_range: Key = 16;
    let cfg = MapConfig {
        pool_slots: 2 + key_range as usize + 2 * threads * batch_capacity + 2 * batch_capacity,
        batch_capacity,
        max_handles: threads + 4,
        index: IndexChoice::None,
        index_slots: 0,
        shadow: true,
        pause_hooks: false,
        seed: 1,
    };
    let map = VersionedMap::new(cfg).map_err(|e| e.to_string())?;
    std::thread::scope(|s| {
        for t in 0..threads {
            let map = &map;
            s.spawn(move || {
                let mut h = map.handle();
                let mut rng = StdRng::seed_from_u64(t as u64);
                let mut out = Vec::new();
                for _ in 0..total_ops / threads {
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
    audit_shadow(&map, threads, batch_capacity.max(64))
}

/// Lock-freedom proxy result.
#[derive(Clone, Copy, Debug, Default)]
pub struct SuspensionReport {
    pub rounds: u64,
    pub timeouts: u64,
    pub max_steps_observed: u64,
}

/// Runs churn on `threads` workers with suspension hooks. `rounds` times,
/// all workers but one are suspended at an arbitrary point; the survivor
/// must complete its next operation within `step_bound` loop steps.
pub fn run_lock_freedom(
    threads: usize,
    rounds: u64,
    step_bound: u64,
) -> SuspensionReport {
    let mut cfg = MapConfig::for_key_range(64, threads);
    cfg.pause_hooks = true;
    let map = VersionedMap::new(cfg).unwrap();
    let stop = AtomicBool::new(false);
    let mut report = SuspensionReport::default();
    std::thread::scope(|s| {
        for t in 0..threads {
            let map = &map;
            let stop = &stop;
            s.spawn(move || {
                let mut h = map.handle();
                let mut rng = StdRng::seed_from_u64(t as u64);
                let mut out = Vec::new();
                while !stop.load(SeqCst) {
                    let k: Key = rng.gen_range(1..=64);
                    match rng.gen_range(0..8) {
                        0..=2 => {
                            h.insert(k, 1 + k as Value);
                        }
                        3..=5 => {
                            h.remove(k);
                        }
                        6 => {
                            h.contains(k);
                        }
                        _ => {
                            h.range_query(1, 64, &mut out);
                        }
                    }
                }
            });
        }
        let ctl = Arc::clone(map.pause_control().unwrap());
        while ctl.registered() < threads {
            std::thread::yield_now();
        }
        let mut rng = StdRng::seed_from_u64(99);
        for round in 0..rounds {
            std::thread::sleep(Duration::from_micros(rng.gen_range(100..2000)));
            let survivor = (round as usize) % threads;
            ctl.suspend_all_except(survivor);
            let ops_before = ctl.ops_completed(survivor);
            let steps_before = ctl.steps(survivor);
            let deadline = Instant::now() + Duration::from_secs(20);
            let mut timed_out = false;
            loop {
                if ctl.ops_completed(survivor) > ops_before {
                    break;
                }
                let taken = ctl.steps(survivor) - steps_before;
                if taken > step_bound || Instant::now() > deadline {
                    timed_out = true;
                    break;
                }
                // The survivor needs the core on single-CPU hosts.
                std::thread::yield_now();
            }
            let taken = ctl.steps(survivor) - steps_before;
            report.rounds += 1;
            report.max_steps_observed = report.max_steps_observed.max(taken);
            if timed_out {
                report.timeouts += 1;
            }
            ctl.resume_all();
        }
        stop.store(true, SeqCst);
        ctl.resume_all();
    });
    report
}

/// An index that always answers with the same unusable candidate (the tail
/// sentinel, whose key exceeds every query) and counts probes. Used to show
/// that a traversal gives up on the index after a fixed number of failed
/// probes and falls back to the head.
pub struct CountingStaleIndex {
    pub calls: Arc<AtomicU64>,
}

impl CountingStaleIndex {
    pub fn new(calls: Arc<AtomicU64>) -> CountingStaleIndex {
        CountingStaleIndex { calls }
    }
}

impl FastIndex for CountingStaleIndex {
    fn insert(&self, _key: Key, _node: NodeRef, _birth: u64) {}
    fn remove(&self, _key: Key) {}
    fn update(&self, _key: Key, _node: NodeRef, _birth: u64) {}
    fn find_pred(&self, _key: Key) -> Option<NodeRef> {
        self.calls.fetch_add(1, SeqCst);
        // Slot 1 is the tail sentinel by construction.
        Some(NodeRef::from_index(1))
    }
}
