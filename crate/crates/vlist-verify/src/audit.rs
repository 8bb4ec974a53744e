//! Reclamation shadow-log auditing.

use vlist::VersionedMap;

/// What the audit concluded about one run.
#[derive(Clone, Debug)]
pub struct AuditReport {
    pub stale_reads: u64,
    pub lifetime_overlaps: u64,
    pub peak_retired_unreclaimed: u64,
    pub epoch_advances: u64,
    pub garbage_bound: u64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.stale_reads == 0
            && self.lifetime_overlaps == 0
            && self.peak_retired_unreclaimed <= self.garbage_bound
    }
}

/// Audits a map built with shadow logging. Asserts that every stale read
/// was caught by a rollback (the shadow counters record the ones that were
/// not), that slot lifetimes never overlapped, and that retired-unreclaimed
/// garbage stayed within one retire batch per thread.
pub fn audit_shadow(map: &VersionedMap, threads: usize, batch_capacity: usize) -> Result<AuditReport, String> {
    let shadow = map
        .shadow_report()
        .ok_or("map was not built with shadow logging")?;
    let stats = map.stats();
    let report = AuditReport {
        stale_reads: shadow.stale_reads,
        lifetime_overlaps: shadow.lifetime_overlaps,
        peak_retired_unreclaimed: stats.pool.peak_retired_unreclaimed,
        epoch_advances: stats.pool.epoch_advances,
        garbage_bound: (batch_capacity * threads) as u64,
    };
    if report.passed() {
        Ok(report)
    } else {
        let mut msg = format!(
            "audit failed: {} stale reads without rollback, {} lifetime overlaps, peak garbage {} (bound {})",
            report.stale_reads,
            report.lifetime_overlaps,
            report.peak_retired_unreclaimed,
            report.garbage_bound,
        );
        for ev in shadow.events.iter().take(5) {
            msg.push_str(&format!(
                "\n  slot {} believed birth {} saw birth {} at epoch {}",
                ev.slot, ev.believed_birth, ev.seen_birth, ev.guard_epoch
            ));
        }
        Err(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vlist::{MapConfig, VersionedMap};

    #[test]
    fn single_threaded_run_audits_clean() {
        let mut cfg = MapConfig::for_key_range(64, 1);
        cfg.shadow = true;
        let map = VersionedMap::new(cfg).unwrap();
        let mut h = map.handle();
        for round in 0..200i64 {
            let k = round % 32 + 1;
            h.insert(k, 1);
            h.remove(k);
        }
        let report = audit_shadow(&map, 1, 64).unwrap();
        assert_eq!(report.stale_reads, 0);
    }

    #[test]
    fn reuse_free_run_never_advances_the_epoch() {
        let mut cfg = MapConfig::for_key_range(64, 1);
        cfg.shadow = true;
        let map = VersionedMap::new(cfg).unwrap();
        let mut h = map.handle();
        for k in 1..=32 {
            h.insert(k, 1);
        }
        let report = audit_shadow(&map, 1, 64).unwrap();
        assert_eq!(report.epoch_advances, 0);
    }

    #[test]
    fn unshadowed_map_is_refused() {
        let map = VersionedMap::new(MapConfig::for_key_range(64, 1)).unwrap();
        assert!(audit_shadow(&map, 1, 64).is_err());
    }
}
