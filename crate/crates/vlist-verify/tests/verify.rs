//! Shortened versions of the verification suites; the acceptance test
//! target runs them at full scale.

use std::sync::atomic::{AtomicU64, Ordering::SeqCst};
use std::sync::Arc;
use std::time::Duration;

use vlist::{IndexChoice, MapConfig, VersionedMap, MAX_ATTEMPTS, NO_VAL};
use vlist_verify::checker::check_linearizable;
use vlist_verify::stress::{
    check_random_history, crafted_reject_histories, run_forced_reuse, run_lock_freedom,
    run_oracle_equivalence, run_ping_pong, CountingStaleIndex,
};

#[test]
fn short_oracle_replay_with_and_without_index() {
    run_oracle_equivalence(1, 2000, 256, IndexChoice::None).unwrap();
    run_oracle_equivalence(1, 2000, 256, IndexChoice::SkipList).unwrap();
}

#[test]
fn random_histories_are_linearizable() {
    for seed in 0..50 {
        check_random_history(seed, IndexChoice::None).unwrap();
    }
}

#[test]
fn crafted_impossible_histories_are_rejected() {
    for history in crafted_reject_histories() {
        assert!(!check_linearizable(&history));
    }
}

#[test]
fn short_ping_pong_has_no_snapshot_anomalies() {
    let report = run_ping_pong(Duration::from_millis(500), IndexChoice::None);
    assert!(report.queries > 0);
    assert_eq!(report.saw_both, 0);
    assert_eq!(report.saw_neither, 0);
}

#[test]
fn short_forced_reuse_audits_clean() {
    for cap in [1, 64] {
        let report = run_forced_reuse(cap, 4, 40_000).unwrap();
        assert_eq!(report.stale_reads, 0, "batch capacity {cap}");
        assert_eq!(report.lifetime_overlaps, 0, "batch capacity {cap}");
    }
}

#[test]
fn short_suspension_run_stays_bounded() {
    let report = run_lock_freedom(4, 10, 1_000_000);
    assert_eq!(report.rounds, 10);
    assert_eq!(report.timeouts, 0, "max steps {}", report.max_steps_observed);
}

#[test]
fn stale_index_is_probed_a_fixed_number_of_times_then_ignored() {
    let calls = Arc::new(AtomicU64::new(0));
    let cfg = MapConfig::for_key_range(64, 1);
    let map =
        VersionedMap::with_index(cfg, Box::new(CountingStaleIndex::new(calls.clone()))).unwrap();
    let mut h = map.handle();
    assert_eq!(h.contains(5), NO_VAL);
    assert_eq!(calls.load(SeqCst), MAX_ATTEMPTS as u64);
    // The head fallback keeps the map fully functional.
    assert_eq!(h.insert(5, 7), NO_VAL);
    assert_eq!(h.contains(5), 7);
    assert_eq!(h.remove(5), 7);
}
