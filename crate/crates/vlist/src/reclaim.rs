//! Version-based reclamation over a fixed slot pool.
//!
//! Nodes are never freed; they live in pre-allocated 16-byte-aligned slots
//! and are recycled through retire batches. Each node carries a birth epoch,
//! packed in one 128-bit atomic cell with its timestamp, and a version
//! packed with its next link. Readers run optimistically and validate:
//!
//! 1. after reading any field of a node, re-read its birth epoch and roll
//!    back if it exceeds the epoch recorded at the operation checkpoint;
//! 2. before trusting a next link, check the successor's birth epoch against
//!    the link's version;
//! 3. before trusting a prior link, check the target's birth epoch against
//!    the owning node's (birth epochs never increase along prior chains).
//!
//! A retire batch is stamped with the epoch at which it filled. Reusing a
//! batch stamped with the current epoch forces the epoch forward first, so
//! two lifetimes of one slot never share an epoch. That collision rule is
//! the only thing that advances the epoch clock, which keeps rollbacks rare.

use std::collections::HashMap;
use std::sync::atomic::{AtomicI64, AtomicU64, AtomicUsize, Ordering::SeqCst};
use std::sync::{Arc, Mutex};

use portable_atomic::AtomicU128;

use crate::clock::{EpochClock, TimestampClock, BOT, EPOCH_INIT, TS_INIT};
use crate::tagged::{NodeRef, TaggedLink};
use crate::{ConfigError, Key, Value};

fn pack(lo: u64, hi: u64) -> u128 {
    (lo as u128) | ((hi as u128) << 64)
}

fn unpack(w: u128) -> (u64, u64) {
    (w as u64, (w >> 64) as u64)
}

/// One node slot. `ts_birth` packs (timestamp, birth epoch); `next` packs
/// (tagged link word, version). `prior` is written once per lifetime before
/// the node is published and is immutable afterwards.
#[repr(C, align(16))]
pub(crate) struct NodeSlot {
    pub(crate) ts_birth: AtomicU128,
    pub(crate) next: AtomicU128,
    pub(crate) key: AtomicI64,
    pub(crate) value: AtomicU64,
    pub(crate) prior: AtomicU64,
}

impl NodeSlot {
    fn new() -> Self {
        NodeSlot {
            ts_birth: AtomicU128::new(0),
            next: AtomicU128::new(0),
            key: AtomicI64::new(0),
            value: AtomicU64::new(0),
            prior: AtomicU64::new(0),
        }
    }
}

/// A retire batch: a fixed-capacity list of retired slots. Published to the
/// global pool only when full (or when its owner flushes), stamped with the
/// epoch and timestamp at publication.
struct Batch {
    entries: Box<[AtomicU64]>,
    len: AtomicUsize,
    epoch_stamp: AtomicU64,
    ts_stamp: AtomicU64,
    next: AtomicU64,
}

impl Batch {
    fn new(capacity: usize) -> Self {
        Batch {
            entries: (0..capacity).map(|_| AtomicU64::new(0)).collect(),
            len: AtomicUsize::new(0),
            epoch_stamp: AtomicU64::new(0),
            ts_stamp: AtomicU64::new(0),
            next: AtomicU64::new(0),
        }
    }
}

/// Treiber stack of batch indices. The top word packs a modification
/// counter in the high half and (batch index + 1) in the low half, so a
/// popped-and-repushed batch cannot be confused with the old top.
struct BatchStack {
    top: AtomicU64,
}

impl BatchStack {
    fn new() -> Self {
        BatchStack { top: AtomicU64::new(0) }
    }

    fn push(&self, batches: &[Batch], idx: u32) {
        loop {
            let top = self.top.load(SeqCst);
            batches[idx as usize].next.store(top & 0xffff_ffff, SeqCst);
            let new = ((top >> 32).wrapping_add(1) << 32) | (idx as u64 + 1);
            if self
                .top
                .compare_exchange(top, new, SeqCst, SeqCst)
                .is_ok()
            {
                return;
            }
        }
    }

    fn pop(&self, batches: &[Batch]) -> Option<u32> {
        loop {
            let top = self.top.load(SeqCst);
            let idx1 = top & 0xffff_ffff;
            if idx1 == 0 {
                return None;
            }
            let idx = (idx1 - 1) as u32;
            let next = batches[idx as usize].next.load(SeqCst);
            let new = ((top >> 32).wrapping_add(1) << 32) | (next & 0xffff_ffff);
            if self
                .top
                .compare_exchange(top, new, SeqCst, SeqCst)
                .is_ok()
            {
                return Some(idx);
            }
        }
    }
}

/// Per-thread allocation and retirement state. Obtained from
/// [`Pool::register`]; return it with [`Pool::release`] when done so partly
/// filled batches flow back to the pool.
pub struct LocalPool {
    alloc_slots: Vec<u64>,
    retire_batch: u32,
}

/// Pool configuration.
pub struct PoolConfig {
    /// Total node slots, including sentinels.
    pub slots: usize,
    /// Entries per retire batch.
    pub batch_capacity: usize,
    /// Upper bound on concurrently registered threads.
    pub max_handles: usize,
    /// Record lifetimes and cross-lifetime reads in a shadow log.
    pub shadow: bool,
}

struct ShadowState {
    last_birth: Box<[AtomicU64]>,
    last_retire: Box<[AtomicU64]>,
    stale_reads: AtomicU64,
    lifetime_overlaps: AtomicU64,
    events: Mutex<Vec<StaleEvent>>,
}

/// One undetected cross-lifetime read, as recorded by the shadow log.
#[derive(Clone, Copy, Debug)]
pub struct StaleEvent {
    pub slot: usize,
    pub believed_birth: u64,
    pub seen_birth: u64,
    pub guard_epoch: u64,
}

/// Shadow-log summary. All counts are expected to be zero; every
/// cross-lifetime read must instead surface as a rollback.
#[derive(Clone, Debug, Default)]
pub struct ShadowReport {
    pub stale_reads: u64,
    pub lifetime_overlaps: u64,
    pub events: Vec<StaleEvent>,
}

/// Running pool counters.
#[derive(Clone, Copy, Debug, Default)]
pub struct PoolStats {
    pub allocs: u64,
    pub retires: u64,
    pub retired_unreclaimed: u64,
    pub peak_retired_unreclaimed: u64,
    pub epoch_advances: u64,
}

/// The shared slot pool.
pub struct Pool {
    slots: Box<[NodeSlot]>,
    batches: Box<[Batch]>,
    full: BatchStack,
    spare: BatchStack,
    batch_capacity: usize,
    pub(crate) epoch: Arc<EpochClock>,
    allocs: AtomicU64,
    retires: AtomicU64,
    retired_unreclaimed: AtomicU64,
    peak_retired: AtomicU64,
    epoch_advances: AtomicU64,
    shadow: Option<ShadowState>,
}

impl Pool {
    /// Builds a pool with `reserved` slots held back for sentinels (indices
    /// `0..reserved`, never entering circulation).
    pub fn new(cfg: &PoolConfig, reserved: usize) -> Result<Pool, ConfigError> {
        if !AtomicU128::is_lock_free() {
            return Err(ConfigError::NoWideCas);
        }
        if cfg.batch_capacity == 0 {
            return Err(ConfigError::BadBatchCapacity);
        }
        let min = reserved + 2 * cfg.batch_capacity;
        if cfg.slots < min {
            return Err(ConfigError::PoolTooSmall { slots: cfg.slots, min });
        }
        let cap = cfg.batch_capacity;
        let free = cfg.slots - reserved;
        let n_full = free.div_ceil(cap);
        let n_spare = 2 * cfg.max_handles + 4;
        let batches: Box<[Batch]> = (0..n_full + n_spare).map(|_| Batch::new(cap)).collect();
        let pool = Pool {
            slots: (0..cfg.slots).map(|_| NodeSlot::new()).collect(),
            batches,
            full: BatchStack::new(),
            spare: BatchStack::new(),
            batch_capacity: cap,
            epoch: Arc::new(EpochClock::new()),
            allocs: AtomicU64::new(0),
            retires: AtomicU64::new(0),
            retired_unreclaimed: AtomicU64::new(0),
            peak_retired: AtomicU64::new(0),
            epoch_advances: AtomicU64::new(0),
            shadow: cfg.shadow.then(|| ShadowState {
                last_birth: (0..cfg.slots).map(|_| AtomicU64::new(0)).collect(),
                last_retire: (0..cfg.slots).map(|_| AtomicU64::new(0)).collect(),
                stale_reads: AtomicU64::new(0),
                lifetime_overlaps: AtomicU64::new(0),
                events: Mutex::new(Vec::new()),
            }),
        };
        let mut slot = reserved;
        for idx in 0..n_full {
            let batch = &pool.batches[idx];
            let mut len = 0;
            while len < cap && slot < cfg.slots {
                batch.entries[len].store(slot as u64, SeqCst);
                slot += 1;
                len += 1;
            }
            batch.len.store(len, SeqCst);
            pool.full.push(&pool.batches, idx as u32);
        }
        for idx in n_full..n_full + n_spare {
            pool.spare.push(&pool.batches, idx as u32);
        }
        Ok(pool)
    }

    pub(crate) fn slot(&self, n: NodeRef) -> &NodeSlot {
        &self.slots[n.index()]
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn current_epoch(&self) -> u64 {
        self.epoch.current()
    }

    /// Registers a thread, handing it a retire container.
    pub fn register(&self) -> LocalPool {
        let retire = self
            .spare
            .pop(&self.batches)
            .expect("pool misconfigured: no spare retire containers (too many handles?)");
        LocalPool { alloc_slots: Vec::with_capacity(self.batch_capacity), retire_batch: retire }
    }

    /// Returns a thread's state to the pool, publishing any pending retires
    /// and unused allocations.
    pub fn release(&self, mut local: LocalPool) {
        let batch = &self.batches[local.retire_batch as usize];
        let len = batch.len.load(SeqCst);
        if len > 0 {
            self.publish_retire_batch(local.retire_batch, len, 0);
        } else {
            self.spare.push(&self.batches, local.retire_batch);
        }
        if !local.alloc_slots.is_empty() {
            let idx = self
                .spare
                .pop(&self.batches)
                .expect("pool misconfigured: no spare container for release");
            let batch = &self.batches[idx as usize];
            for (i, slot) in local.alloc_slots.drain(..).enumerate() {
                batch.entries[i].store(slot, SeqCst);
                batch.len.store(i + 1, SeqCst);
            }
            // These slots were never handed out in a new lifetime, so the
            // collision rule still fires off the stamp below if needed.
            batch.epoch_stamp.store(self.epoch.current(), SeqCst);
            batch.ts_stamp.store(0, SeqCst);
            self.full.push(&self.batches, idx);
        }
    }

    fn publish_retire_batch(&self, idx: u32, len: usize, ts_stamp: u64) {
        let batch = &self.batches[idx as usize];
        batch.epoch_stamp.store(self.epoch.current(), SeqCst);
        batch.ts_stamp.store(ts_stamp, SeqCst);
        self.full.push(&self.batches, idx);
        self.retired_unreclaimed.fetch_sub(len as u64, SeqCst);
    }

    /// Writes a sentinel slot in place: published timestamp, initial epoch,
    /// null prior. Only valid for reserved slots before any handle exists.
    pub(crate) fn init_sentinel(&self, n: NodeRef, key: Key, next: TaggedLink) {
        let slot = self.slot(n);
        slot.ts_birth.store(pack(TS_INIT, EPOCH_INIT), SeqCst);
        slot.key.store(key, SeqCst);
        slot.value.store(0, SeqCst);
        slot.prior.store(0, SeqCst);
        slot.next.store(pack(next.raw(), EPOCH_INIT), SeqCst);
    }

    pub(crate) fn epoch_handle(&self) -> Arc<EpochClock> {
        self.epoch.clone()
    }

    fn refill(&self, local: &mut LocalPool, ts: &TimestampClock) {
        let idx = match self.full.pop(&self.batches) {
            Some(idx) => idx,
            None => {
                // Last resort: recycle our own pending retires.
                let batch = &self.batches[local.retire_batch as usize];
                let len = batch.len.load(SeqCst);
                if len > 0 {
                    self.publish_retire_batch(local.retire_batch, len, ts.get());
                    local.retire_batch = self
                        .spare
                        .pop(&self.batches)
                        .expect("pool misconfigured: no spare retire containers");
                }
                self.full
                    .pop(&self.batches)
                    .expect("node pool exhausted: raise the slot count for this workload")
            }
        };
        let batch = &self.batches[idx as usize];
        // Reusing a batch stamped with the current epoch would let two
        // lifetimes of a slot share an epoch; tick the clock first.
        let stamp = batch.epoch_stamp.load(SeqCst);
        loop {
            let cur = self.epoch.current();
            if stamp != cur {
                break;
            }
            if self.epoch.advance_past(cur) {
                self.epoch_advances.fetch_add(1, SeqCst);
                break;
            }
        }
        // If no range query ran since the batch was stamped, nudge the
        // timestamp clock so retries of interfered queries see time move.
        let ts_stamp = batch.ts_stamp.load(SeqCst);
        if ts_stamp != 0 && ts_stamp == ts.get() {
            ts.fetch_add();
        }
        let len = batch.len.swap(0, SeqCst);
        for i in 0..len {
            local.alloc_slots.push(batch.entries[i].load(SeqCst));
        }
        self.spare.push(&self.batches, idx);
    }

    /// Allocates a node: timestamp BOT, birth = current epoch, next version
    /// = max(birth, successor birth). Panics if the pool is exhausted.
    pub fn alloc(
        &self,
        local: &mut LocalPool,
        ts: &TimestampClock,
        key: Key,
        value: Value,
        next: TaggedLink,
        succ_birth: u64,
        prior: Option<NodeRef>,
    ) -> (NodeRef, u64) {
        let idx = loop {
            match local.alloc_slots.pop() {
                Some(idx) => break idx as usize,
                None => self.refill(local, ts),
            }
        };
        let slot = &self.slots[idx];
        let birth = self.epoch.current();
        // Birth is (re)written before the other fields: a reader that sees
        // any new field value will also see the new birth on its re-read.
        slot.ts_birth.store(pack(BOT, birth), SeqCst);
        if let Some(shadow) = &self.shadow {
            if birth <= shadow.last_retire[idx].load(SeqCst) {
                shadow.lifetime_overlaps.fetch_add(1, SeqCst);
            }
            shadow.last_birth[idx].store(birth, SeqCst);
        }
        slot.key.store(key, SeqCst);
        slot.value.store(value, SeqCst);
        slot.prior.store(prior.map_or(0, |p| TaggedLink::to(p).raw()), SeqCst);
        slot.next.store(pack(next.raw(), birth.max(succ_birth)), SeqCst);
        self.allocs.fetch_add(1, SeqCst);
        (NodeRef::from_index(idx), birth)
    }

    /// Retires an unlinked (or never published) node. When the local batch
    /// fills, it is stamped and published, making its slots reusable.
    pub fn retire(&self, local: &mut LocalPool, ts: &TimestampClock, node: NodeRef) {
        if let Some(shadow) = &self.shadow {
            shadow.last_retire[node.index()].store(self.epoch.current(), SeqCst);
        }
        self.retires.fetch_add(1, SeqCst);
        let pending = self.retired_unreclaimed.fetch_add(1, SeqCst) + 1;
        self.peak_retired.fetch_max(pending, SeqCst);
        let batch = &self.batches[local.retire_batch as usize];
        let len = batch.len.load(SeqCst);
        batch.entries[len].store(node.index() as u64, SeqCst);
        batch.len.store(len + 1, SeqCst);
        if len + 1 == self.batch_capacity {
            self.publish_retire_batch(local.retire_batch, len + 1, ts.get());
            local.retire_batch = self
                .spare
                .pop(&self.batches)
                .expect("pool misconfigured: no spare retire containers");
        }
    }

    pub fn stats(&self) -> PoolStats {
        PoolStats {
            allocs: self.allocs.load(SeqCst),
            retires: self.retires.load(SeqCst),
            retired_unreclaimed: self.retired_unreclaimed.load(SeqCst),
            peak_retired_unreclaimed: self.peak_retired.load(SeqCst),
            epoch_advances: self.epoch_advances.load(SeqCst),
        }
    }

    pub fn shadow_report(&self) -> Option<ShadowReport> {
        self.shadow.as_ref().map(|s| ShadowReport {
            stale_reads: s.stale_reads.load(SeqCst),
            lifetime_overlaps: s.lifetime_overlaps.load(SeqCst),
            events: s.events.lock().unwrap().clone(),
        })
    }

    fn raw_birth(&self, n: NodeRef) -> u64 {
        unpack(self.slot(n).ts_birth.load(SeqCst)).1
    }

    // Raw accessors for quiescent inspection; no validation.

    pub fn raw_ts_birth(&self, n: NodeRef) -> (u64, u64) {
        unpack(self.slot(n).ts_birth.load(SeqCst))
    }

    pub fn raw_next(&self, n: NodeRef) -> (TaggedLink, u64) {
        let (w, v) = unpack(self.slot(n).next.load(SeqCst));
        (TaggedLink::from_raw(w), v)
    }

    pub fn raw_key(&self, n: NodeRef) -> Key {
        self.slot(n).key.load(SeqCst)
    }

    /// Overwrites a slot's key, bypassing every protocol rule. Exists only
    /// so invariant probes can be handed a corrupted list as a negative
    /// control.
    #[doc(hidden)]
    pub fn corrupt_key(&self, n: NodeRef, key: Key) {
        self.slot(n).key.store(key, SeqCst);
    }

    pub fn raw_value(&self, n: NodeRef) -> Value {
        self.slot(n).value.load(SeqCst)
    }

    pub fn raw_prior(&self, n: NodeRef) -> Option<NodeRef> {
        TaggedLink::from_raw(self.slot(n).prior.load(SeqCst)).node()
    }

    pub(crate) fn wcas_next(
        &self,
        n: NodeRef,
        old: (TaggedLink, u64),
        new: (TaggedLink, u64),
    ) -> bool {
        self.slot(n)
            .next
            .compare_exchange(
                pack(old.0.raw(), old.1),
                pack(new.0.raw(), new.1),
                SeqCst,
                SeqCst,
            )
            .is_ok()
    }

    pub(crate) fn wcas_ts(&self, n: NodeRef, old: (u64, u64), new: (u64, u64)) -> bool {
        self.slot(n)
            .ts_birth
            .compare_exchange(pack(old.0, old.1), pack(new.0, new.1), SeqCst, SeqCst)
            .is_ok()
    }
}

/// Rollback signal: a guarded read hit a recycled slot; the operation must
/// restart from its checkpoint with a fresh epoch.
#[derive(Debug, Clone, Copy)]
pub struct Rollback;

/// Result of a guarded read.
pub type Read<T> = Result<T, Rollback>;

/// One operation attempt's view of the pool: the epoch recorded at the
/// checkpoint plus the validation logic of the three read guidelines.
pub struct Guard<'p> {
    pool: &'p Pool,
    epoch: u64,
    believed: Option<HashMap<usize, u64>>,
}

impl<'p> Guard<'p> {
    pub fn new(pool: &'p Pool) -> Self {
        Guard {
            pool,
            epoch: pool.epoch.current(),
            believed: pool.shadow.as_ref().map(|_| HashMap::new()),
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Guideline 1 check, shared by all field reads. The shadow log tracks
    /// which lifetime (birth) this guard first saw per slot; a later read
    /// observing a different birth that still passes the epoch check is an
    /// undetected stale read and is recorded.
    fn check(&mut self, n: NodeRef, birth: u64) -> Read<()> {
        if let Some(believed) = &mut self.believed {
            let entry = believed.entry(n.index()).or_insert(birth);
            if *entry != birth && birth <= self.epoch {
                let shadow = self.pool.shadow.as_ref().unwrap();
                shadow.stale_reads.fetch_add(1, SeqCst);
                let mut events = shadow.events.lock().unwrap();
                if events.len() < 32 {
                    events.push(StaleEvent {
                        slot: n.index(),
                        believed_birth: *entry,
                        seen_birth: birth,
                        guard_epoch: self.epoch,
                    });
                }
                *entry = birth;
            }
        }
        if birth > self.epoch {
            Err(Rollback)
        } else {
            Ok(())
        }
    }

    pub fn key(&mut self, n: NodeRef) -> Read<Key> {
        let k = self.pool.slot(n).key.load(SeqCst);
        let birth = self.pool.raw_birth(n);
        self.check(n, birth)?;
        Ok(k)
    }

    pub fn value(&mut self, n: NodeRef) -> Read<Value> {
        let v = self.pool.slot(n).value.load(SeqCst);
        let birth = self.pool.raw_birth(n);
        self.check(n, birth)?;
        Ok(v)
    }

    /// Reads (timestamp, birth) as one atomic pair.
    pub fn ts_birth(&mut self, n: NodeRef) -> Read<(u64, u64)> {
        let (ts, birth) = unpack(self.pool.slot(n).ts_birth.load(SeqCst));
        self.check(n, birth)?;
        Ok((ts, birth))
    }

    /// Reads (next link, version) as one atomic pair.
    pub fn next(&mut self, n: NodeRef) -> Read<(TaggedLink, u64)> {
        let (w, v) = unpack(self.pool.slot(n).next.load(SeqCst));
        let birth = self.pool.raw_birth(n);
        self.check(n, birth)?;
        Ok((TaggedLink::from_raw(w), v))
    }

    /// Guideline 2: validates a successor reached through a next link read
    /// as (link, version). Returns the successor's birth epoch.
    pub fn deref_next(&mut self, succ: NodeRef, link_version: u64) -> Read<u64> {
        let birth = self.pool.raw_birth(succ);
        if birth > link_version {
            return Err(Rollback);
        }
        if let Some(believed) = &mut self.believed {
            believed.entry(succ.index()).or_insert(birth);
        }
        Ok(birth)
    }

    /// Guideline 3: follows a node's prior link, validating the target's
    /// birth epoch against the owner's. Returns the target and its birth.
    pub fn deref_prior(&mut self, n: NodeRef, n_birth: u64) -> Read<Option<(NodeRef, u64)>> {
        let word = self.pool.slot(n).prior.load(SeqCst);
        let birth = self.pool.raw_birth(n);
        self.check(n, birth)?;
        match TaggedLink::from_raw(word).node() {
            None => Ok(None),
            Some(p) => {
                let p_birth = self.pool.raw_birth(p);
                if p_birth > n_birth {
                    return Err(Rollback);
                }
                if let Some(believed) = &mut self.believed {
                    believed.entry(p.index()).or_insert(p_birth);
                }
                Ok(Some((p, p_birth)))
            }
        }
    }

    /// Publishes a node's timestamp if still unset, reading first so the
    /// CAS is elided once some thread has published it. Returns the
    /// published timestamp.
    pub fn publish_ts(&mut self, n: NodeRef, clock: &TimestampClock) -> Read<u64> {
        loop {
            let (ts, birth) = self.ts_birth(n)?;
            if ts != BOT {
                return Ok(ts);
            }
            let now = clock.get();
            if self.pool.wcas_ts(n, (BOT, birth), (now, birth)) {
                return Ok(now);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::EPOCH_INIT;
    use crate::KEY_MAX;

    fn small_pool(slots: usize, cap: usize, shadow: bool) -> Pool {
        Pool::new(
            &PoolConfig { slots, batch_capacity: cap, max_handles: 4, shadow },
            0,
        )
        .unwrap()
    }

    #[test]
    fn fresh_alloc_has_bot_ts_and_current_epoch() {
        let pool = small_pool(8, 2, false);
        let ts = TimestampClock::new();
        let mut local = pool.register();
        let (n, birth) = pool.alloc(&mut local, &ts, 5, 10, TaggedLink::NULL, 0, None);
        assert_eq!(birth, EPOCH_INIT);
        assert_eq!(pool.raw_ts_birth(n), (BOT, EPOCH_INIT));
        assert_eq!(pool.raw_key(n), 5);
        assert_eq!(pool.raw_value(n), 10);
        pool.release(local);
    }

    #[test]
    fn reuse_of_batch_stamped_at_current_epoch_ticks_epoch() {
        let pool = small_pool(4, 1, false);
        let ts = TimestampClock::new();
        let mut local = pool.register();
        let e0 = pool.current_epoch();
        let (n, _) = pool.alloc(&mut local, &ts, 1, 1, TaggedLink::NULL, 0, None);
        pool.retire(&mut local, &ts, n);
        let (n2, birth2) = loop {
            let (n2, birth2) = pool.alloc(&mut local, &ts, 2, 2, TaggedLink::NULL, 0, None);
            if n2 == n {
                break (n2, birth2);
            }
        };
        assert_eq!(n2, n);
        assert!(birth2 > e0, "collision rule must tick the epoch before reuse");
        assert!(pool.stats().epoch_advances >= 1);
        pool.release(local);
    }

    #[test]
    fn epoch_does_not_advance_without_reuse() {
        let pool = small_pool(64, 4, false);
        let ts = TimestampClock::new();
        let mut local = pool.register();
        for i in 0..32 {
            pool.alloc(&mut local, &ts, i, 1, TaggedLink::NULL, 0, None);
        }
        assert_eq!(pool.stats().epoch_advances, 0);
        assert_eq!(pool.current_epoch(), EPOCH_INIT);
        pool.release(local);
    }

    #[test]
    fn guarded_read_rolls_back_after_reuse() {
        let pool = small_pool(4, 1, false);
        let ts = TimestampClock::new();
        let mut local = pool.register();
        let (n, _) = pool.alloc(&mut local, &ts, 7, 7, TaggedLink::NULL, 0, None);
        let mut guard = Guard::new(&pool);
        assert_eq!(guard.key(n).unwrap(), 7);
        pool.retire(&mut local, &ts, n);
        let mut held = Vec::new();
        loop {
            let (n2, _) = pool.alloc(&mut local, &ts, 9, 9, TaggedLink::NULL, 0, None);
            if n2 == n {
                break;
            }
            held.push(n2);
        }
        assert!(guard.key(n).is_err(), "old guard must roll back on the recycled slot");
        let mut fresh = Guard::new(&pool);
        assert_eq!(fresh.key(n).unwrap(), 9);
        pool.release(local);
    }

    #[test]
    fn deref_next_rejects_recycled_successor() {
        let pool = small_pool(4, 1, false);
        let ts = TimestampClock::new();
        let mut local = pool.register();
        let (succ, succ_birth) = pool.alloc(&mut local, &ts, 10, 1, TaggedLink::NULL, 0, None);
        let (node, _) =
            pool.alloc(&mut local, &ts, 5, 1, TaggedLink::to(succ), succ_birth, None);
        let (_, version) = pool.raw_next(node);
        let mut guard = Guard::new(&pool);
        assert!(guard.deref_next(succ, version).is_ok());
        pool.retire(&mut local, &ts, succ);
        let mut held = Vec::new();
        loop {
            let (n, _) = pool.alloc(&mut local, &ts, 1, 1, TaggedLink::NULL, 0, None);
            if n == succ {
                break;
            }
            held.push(n);
        }
        let mut guard = Guard::new(&pool);
        assert!(
            guard.deref_next(succ, version).is_err(),
            "successor recycled after link creation must fail the version check"
        );
        pool.release(local);
    }

    #[test]
    fn deref_prior_rejects_recycled_target() {
        let pool = small_pool(4, 1, false);
        let ts = TimestampClock::new();
        let mut local = pool.register();
        let (target, _) = pool.alloc(&mut local, &ts, 10, 1, TaggedLink::NULL, 0, None);
        let (node, node_birth) =
            pool.alloc(&mut local, &ts, 5, 1, TaggedLink::NULL, 0, Some(target));
        let mut guard = Guard::new(&pool);
        assert_eq!(guard.deref_prior(node, node_birth).unwrap(), Some((target, node_birth)));
        pool.retire(&mut local, &ts, target);
        let mut held = Vec::new();
        loop {
            let (n, _) = pool.alloc(&mut local, &ts, 1, 1, TaggedLink::NULL, 0, None);
            if n == target {
                break;
            }
            held.push(n);
        }
        let mut guard = Guard::new(&pool);
        assert!(
            guard.deref_prior(node, node_birth).is_err(),
            "prior target recycled with a newer birth must roll back"
        );
        pool.release(local);
    }

    #[test]
    fn lifetimes_of_one_slot_are_disjoint() {
        let pool = small_pool(6, 1, true);
        let ts = TimestampClock::new();
        let mut local = pool.register();
        let mut spans: HashMap<usize, Vec<(u64, u64)>> = HashMap::new();
        let mut live: Vec<(NodeRef, u64)> = Vec::new();
        for round in 0..200u64 {
            let (n, birth) =
                pool.alloc(&mut local, &ts, round as i64, 1, TaggedLink::NULL, 0, None);
            if live.len() >= 3 {
                let (old, old_birth) = live.remove(0);
                pool.retire(&mut local, &ts, old);
                spans.entry(old.index()).or_default().push((old_birth, pool.current_epoch()));
            }
            live.push((n, birth));
        }
        for lives in spans.values() {
            for pair in lives.windows(2) {
                assert!(pair[0].1 < pair[1].0, "lifetime intervals must not share an epoch");
            }
        }
        let report = pool.shadow_report().unwrap();
        assert_eq!(report.lifetime_overlaps, 0);
        pool.release(local);
    }

    #[test]
    fn publish_ts_is_idempotent() {
        let pool = small_pool(8, 2, false);
        let ts = TimestampClock::new();
        let mut local = pool.register();
        let (n, _) = pool.alloc(&mut local, &ts, KEY_MAX - 1, 1, TaggedLink::NULL, 0, None);
        let mut guard = Guard::new(&pool);
        let t = guard.publish_ts(n, &ts).unwrap();
        assert_eq!(t, 2);
        ts.fetch_add();
        assert_eq!(guard.publish_ts(n, &ts).unwrap(), t, "a published timestamp is immutable");
        pool.release(local);
    }
}
