//! Concurrency smoke tests. Deeper verification (linearizability, forced
//! reuse, suspension) lives in the verification crate.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering::SeqCst};
use std::sync::Barrier;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vlist::{IndexChoice, Key, MapConfig, VersionedMap, NO_VAL};

#[test]
fn racing_removers_claim_exactly_once() {
    let map = VersionedMap::new(MapConfig::for_key_range(64, 4)).unwrap();
    for _ in 0..200 {
        map.handle().insert(5, 0xa);
        let barrier = Barrier::new(2);
        let wins = AtomicU64::new(0);
        std::thread::scope(|s| {
            for _ in 0..2 {
                s.spawn(|| {
                    let mut h = map.handle();
                    barrier.wait();
                    if h.remove(5) != NO_VAL {
                        wins.fetch_add(1, SeqCst);
                    }
                });
            }
        });
        assert_eq!(wins.load(SeqCst), 1);
    }
}

#[test]
fn racing_inserters_claim_exactly_once() {
    let map = VersionedMap::new(MapConfig::for_key_range(64, 4)).unwrap();
    for round in 0..200 {
        let barrier = Barrier::new(2);
        let wins = AtomicU64::new(0);
        std::thread::scope(|s| {
            for t in 0..2u64 {
                let wins = &wins;
                let barrier = &barrier;
                let map = &map;
                s.spawn(move || {
                    let mut h = map.handle();
                    barrier.wait();
                    if h.insert(5, t + 1) == NO_VAL {
                        wins.fetch_add(1, SeqCst);
                    }
                });
            }
        });
        assert_eq!(wins.load(SeqCst), 1, "round {round}");
        assert_ne!(map.handle().remove(5), NO_VAL);
    }
}

#[test]
fn mixed_churn_leaves_a_consistent_map() {
    for index in [IndexChoice::None, IndexChoice::SkipList] {
        let mut cfg = MapConfig::for_key_range(256, 4);
        cfg.index = index;
        cfg.shadow = true;
        let map = VersionedMap::new(cfg).unwrap();
        std::thread::scope(|s| {
            for t in 0..4u64 {
                let map = &map;
                s.spawn(move || {
                    let mut h = map.handle();
                    let mut rng = StdRng::seed_from_u64(t);
                    let mut out = Vec::new();
                    for _ in 0..5000 {
                        let k: Key = rng.gen_range(1..=256);
                        match rng.gen_range(0..10) {
                            0..=3 => {
                                h.insert(k, rng.gen_range(1..=u64::MAX));
                            }
                            4..=7 => {
                                h.remove(k);
                            }
                            8 => {
                                h.contains(k);
                            }
                            _ => {
                                let n = h.range_query(k.max(1), (k + 16).min(256), &mut out);
                                assert_eq!(n, out.len());
                                let keys: Vec<Key> = out.iter().map(|e| e.0).collect();
                                assert!(
                                    keys.windows(2).all(|w| w[0] < w[1]),
                                    "range result not strictly sorted"
                                );
                            }
                        }
                    }
                });
            }
        });
        // Quiescent now: the reachable entries must be strictly sorted and
        // unique, and no guarded read may have consumed a recycled slot
        // without rolling back.
        let snapshot = map.logical_snapshot();
        let keys: Vec<Key> = snapshot.iter().map(|e| e.0).collect();
        let unique: BTreeSet<Key> = keys.iter().copied().collect();
        assert_eq!(keys.len(), unique.len());
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let shadow = map.shadow_report().unwrap();
        assert_eq!(shadow.stale_reads, 0);
        assert_eq!(shadow.lifetime_overlaps, 0);
        let stats = map.stats();
        assert!(stats.pool.peak_retired_unreclaimed <= 256);
    }
}
