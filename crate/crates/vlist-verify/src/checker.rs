//! Linearizability checking for small histories.
//!
//! Depth-first search over linearization orders in the Wing and Gong style:
//! repeatedly pick an operation minimal in the real-time order, replay it on
//! the oracle, and backtrack on a result mismatch. States are memoized by
//! (set of linearized operations, oracle content), which keeps crafted
//! 40-op histories tractable.

use std::collections::HashSet;

use vlist::{Key, Value};

use crate::history::Completed;
use crate::oracle::OracleMap;

/// True iff some permutation of the history, consistent with real time,
/// replays correctly on the sequential oracle.
pub fn check_linearizable(history: &[Completed]) -> bool {
    let n = history.len();
    assert!(n <= 64, "history too long for the bitmask search");
    if n == 0 {
        return true;
    }
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut seen: HashSet<(u64, Vec<(Key, Value)>)> = HashSet::new();
    search(history, 0, &OracleMap::new(), full, &mut seen)
}

fn search(
    history: &[Completed],
    done: u64,
    oracle: &OracleMap,
    full: u64,
    seen: &mut HashSet<(u64, Vec<(Key, Value)>)>,
) -> bool {
    if done == full {
        return true;
    }
    if !seen.insert((done, oracle.entries())) {
        return false;
    }
    'candidates: for i in 0..history.len() {
        if done & (1 << i) != 0 {
            continue;
        }
        // Only operations minimal in the real-time order may go next.
        for j in 0..history.len() {
            if i != j && done & (1 << j) == 0 && history[j].returned < history[i].invoked {
                continue 'candidates;
            }
        }
        let mut next = oracle.clone();
        if next.apply(&history[i].op) != history[i].outcome {
            continue;
        }
        if search(history, done | (1 << i), &next, full, seen) {
            return true;
        }
    }
    false
}
