//! The two logical clocks: query timestamps and reclamation epochs.
//!
//! They are independent monotone counters. The timestamp clock orders range
//! queries against updates and is advanced by every range query. The epoch
//! clock orders node lifetimes and ticks only when a retire batch is reused
//! within the epoch it was stamped with, which keeps it slow and rollbacks
//! rare.

use std::sync::atomic::{AtomicU64, Ordering::SeqCst};

/// The unset timestamp of a pending node.
pub const BOT: u64 = 1;

/// Initial timestamp clock value; real timestamps start here.
pub const TS_INIT: u64 = 2;

/// Initial epoch clock value.
pub const EPOCH_INIT: u64 = 2;

/// Monotone logical clock for range-query snapshots.
pub struct TimestampClock(AtomicU64);

impl TimestampClock {
    pub fn new() -> Self {
        TimestampClock(AtomicU64::new(TS_INIT))
    }

    pub fn get(&self) -> u64 {
        self.0.load(SeqCst)
    }

    /// Increments the clock, returning the pre-increment value.
    pub fn fetch_add(&self) -> u64 {
        self.0.fetch_add(1, SeqCst)
    }
}

impl Default for TimestampClock {
    fn default() -> Self {
        Self::new()
    }
}

/// Monotone reclamation clock.
pub struct EpochClock(AtomicU64);

impl EpochClock {
    pub fn new() -> Self {
        EpochClock(AtomicU64::new(EPOCH_INIT))
    }

    pub fn current(&self) -> u64 {
        self.0.load(SeqCst)
    }

    /// Advances the clock past `observed` if it still equals it. Returns
    /// true if this call performed the advance.
    pub fn advance_past(&self, observed: u64) -> bool {
        self.0
            .compare_exchange(observed, observed + 1, SeqCst, SeqCst)
            .is_ok()
    }
}

impl Default for EpochClock {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_clock_reads_two() {
        let ts = TimestampClock::new();
        assert_eq!(ts.get(), 2);
    }

    #[test]
    fn fetch_add_returns_pre_increment() {
        let ts = TimestampClock::new();
        assert_eq!(ts.fetch_add(), 2);
        assert_eq!(ts.get(), 3);
    }

    #[test]
    fn k_increments_read_two_plus_k() {
        let ts = TimestampClock::new();
        for _ in 0..5 {
            ts.fetch_add();
        }
        assert_eq!(ts.get(), 2 + 5);
    }

    #[test]
    fn bot_is_below_every_timestamp() {
        assert!(BOT < TS_INIT);
    }

    #[test]
    fn epoch_advance_is_conditional() {
        let e = EpochClock::new();
        let cur = e.current();
        assert!(e.advance_past(cur));
        assert_eq!(e.current(), cur + 1);
        assert!(!e.advance_past(cur));
        assert_eq!(e.current(), cur + 1);
    }
}
