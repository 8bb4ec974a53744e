//! Structural invariant probing.
//!
//! Must run while the map is quiescent: raw slot reads are only meaningful
//! when no thread can recycle a node mid-walk.

use vlist::{VersionedMap, BOT, KEY_MAX};

const PRIOR_WALK_BOUND: usize = 100_000;

/// Walks the reachable list and every prior chain, returning the first
/// violated invariant as an error message.
pub fn probe_structure(map: &VersionedMap) -> Result<(), String> {
    let mut n = map.head();
    let mut prev_key = None;
    let mut reached_tail = false;
    let mut reachable = Vec::new();
    loop {
        let raw = map.read_node(n);
        reachable.push(n);
        if let Some(pk) = prev_key {
            if raw.key <= pk {
                return Err(format!(
                    "sortedness violated: key {} follows key {}",
                    raw.key, pk
                ));
            }
        }
        prev_key = Some(raw.key);
        if raw.key == KEY_MAX {
            reached_tail = true;
        }
        if raw.next.is_marked_or_flagged() && raw.ts == BOT {
            return Err(format!("dead node with unpublished timestamp at key {}", raw.key));
        }
        match raw.next.node() {
            Some(s) => n = s,
            None => break,
        }
    }
    if !reached_tail {
        return Err("tail sentinel unreachable from head".into());
    }
    for start in reachable {
        check_prior_chain(map, start)?;
    }
    Ok(())
}

/// Follows prior links from `start`. Within a lifetime (birth epochs
/// non-increasing) the chain must stay timestamp-ordered and terminate; a
/// birth-epoch increase means the target slot was recycled, which ends the
/// walkable portion of the chain.
fn check_prior_chain(map: &VersionedMap, start: vlist::NodeRef) -> Result<(), String> {
    let mut raw = map.read_node(start);
    for _ in 0..PRIOR_WALK_BOUND {
        let Some(p) = raw.prior else { return Ok(()) };
        let p_raw = map.read_node(p);
        if p_raw.birth > raw.birth {
            return Ok(());
        }
        if raw.ts != BOT && p_raw.ts != BOT && p_raw.ts > raw.ts {
            return Err(format!(
                "prior timestamp order violated at key {}: {} > {}",
                raw.key, p_raw.ts, raw.ts
            ));
        }
        raw = p_raw;
    }
    Err(format!(
        "prior chain from key {} did not terminate within {} hops",
        map.read_node(start).key,
        PRIOR_WALK_BOUND
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use vlist::{MapConfig, VersionedMap};

    #[test]
    fn fresh_map_passes() {
        let map = VersionedMap::new(MapConfig::for_key_range(64, 1)).unwrap();
        probe_structure(&map).unwrap();
    }

    #[test]
    fn map_after_churn_passes() {
        let map = VersionedMap::new(MapConfig::for_key_range(64, 1)).unwrap();
        let mut h = map.handle();
        let mut out = Vec::new();
        for round in 0..50i64 {
            for k in 1..=32 {
                if (k + round) % 3 == 0 {
                    h.remove(k);
                } else {
                    h.insert(k, k as u64 + 1);
                }
            }
            h.range_query(1, 32, &mut out);
        }
        probe_structure(&map).unwrap();
    }

    #[test]
    fn corrupted_keys_fail_sortedness() {
        let map = VersionedMap::new(MapConfig::for_key_range(64, 1)).unwrap();
        let mut h = map.handle();
        for k in [3, 7, 11] {
            h.insert(k, 1);
        }
        let (_, n7) = h.find_pair(7);
        map.corrupt_key(n7, 20);
        let err = probe_structure(&map).unwrap_err();
        assert!(err.contains("sortedness"), "unexpected report: {err}");
    }
}
