//! The versioned lock-free linked list behind the map.
//!
//! Deletion happens by replacement: `remove` marks a node's next link, and
//! `trim` later excises the maximal marked run plus its first clean
//! successor in one wide CAS that installs a fresh copy of that successor.
//! Every node records a `prior` link to the node it displaced, and a
//! timestamp drawn from the shared clock; range queries pick a timestamp
//! and walk prior chains until every hop is old enough, which yields a
//! consistent snapshot without blocking writers.

use std::sync::atomic::{AtomicU64, Ordering::SeqCst};
use std::sync::Arc;

use crate::clock::{TimestampClock, BOT, EPOCH_INIT};
use crate::index::{FastIndex, IndexChoice, NoIndex, SkipListIndex, MAX_ATTEMPTS};
use crate::pause::{PauseControl, PauseToken};
use crate::reclaim::{Guard, LocalPool, Pool, PoolConfig, PoolStats, Read, Rollback, ShadowReport};
use crate::tagged::{NodeRef, TaggedLink};
use crate::{ConfigError, Key, Value, KEY_MAX, KEY_MIN, NO_VAL};

const HEAD: NodeRef = NodeRef(0);
const TAIL: NodeRef = NodeRef(1);

/// Map construction parameters.
pub struct MapConfig {
    /// Total node slots, sentinels included.
    pub pool_slots: usize,
    /// Retire batch capacity; 64 unless a test forces faster reuse.
    pub batch_capacity: usize,
    /// Upper bound on live handles.
    pub max_handles: usize,
    pub index: IndexChoice,
    /// Tower slots for the skip-list index; ignored for `IndexChoice::None`.
    pub index_slots: usize,
    /// Record node lifetimes and cross-lifetime reads (testing).
    pub shadow: bool,
    /// Install cooperative suspension hooks (testing).
    pub pause_hooks: bool,
    /// Seed for index level draws.
    pub seed: u64,
}

impl MapConfig {
    /// Sizes the pools for a workload: twice the key range plus one retire
    /// batch of headroom per thread.
    pub fn for_key_range(key_range: usize, threads: usize) -> MapConfig {
        let churn = key_range + 64 * threads;
        MapConfig {
            pool_slots: 2 * churn + 2,
            batch_capacity: 64,
            max_handles: (2 * threads + 8).max(16),
            index: IndexChoice::None,
            index_slots: churn + 1024,
            shadow: false,
            pause_hooks: false,
            seed: 1,
        }
    }
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig::for_key_range(1024, 8)
    }
}

/// Counters exposed for reports and tests.
#[derive(Clone, Copy, Debug)]
pub struct MapStats {
    pub rollbacks: u64,
    pub pool: PoolStats,
    pub timestamp: u64,
    pub epoch: u64,
}

/// A raw, unvalidated view of one slot, for quiescent inspection.
#[derive(Clone, Copy, Debug)]
pub struct RawNode {
    pub key: Key,
    pub value: Value,
    pub ts: u64,
    pub birth: u64,
    pub next: TaggedLink,
    pub next_version: u64,
    pub prior: Option<NodeRef>,
}

struct Shared {
    pool: Pool,
    ts: TimestampClock,
    index: Box<dyn FastIndex>,
    pause: Option<Arc<PauseControl>>,
    rollbacks: AtomicU64,
}

/// The shared map. Clone handles with [`VersionedMap::handle`]; the map
/// itself is just the owner of the slot pool and clocks.
pub struct VersionedMap {
    shared: Arc<Shared>,
}

impl VersionedMap {
    pub fn new(cfg: MapConfig) -> Result<VersionedMap, ConfigError> {
        Self::build(cfg, None)
    }

    /// Builds a map with a caller-provided index implementation. Used by
    /// tests that need to script index behaviour.
    pub fn with_index(
        cfg: MapConfig,
        index: Box<dyn FastIndex>,
    ) -> Result<VersionedMap, ConfigError> {
        Self::build(cfg, Some(index))
    }

    fn build(
        cfg: MapConfig,
        custom_index: Option<Box<dyn FastIndex>>,
    ) -> Result<VersionedMap, ConfigError> {
        let pool = Pool::new(
            &PoolConfig {
                slots: cfg.pool_slots,
                batch_capacity: cfg.batch_capacity,
                max_handles: cfg.max_handles,
                shadow: cfg.shadow,
            },
            2,
        )?;
        pool.init_sentinel(TAIL, KEY_MAX, TaggedLink::NULL);
        pool.init_sentinel(HEAD, KEY_MIN, TaggedLink::to(TAIL));
        let index: Box<dyn FastIndex> = match custom_index {
            Some(idx) => idx,
            None => match cfg.index {
                IndexChoice::None => Box::new(NoIndex),
                IndexChoice::SkipList => Box::new(SkipListIndex::new(
                    cfg.index_slots,
                    pool.epoch_handle(),
                    cfg.seed,
                    HEAD,
                )),
            },
        };
        Ok(VersionedMap {
            shared: Arc::new(Shared {
                pool,
                ts: TimestampClock::new(),
                index,
                pause: cfg.pause_hooks.then(PauseControl::new),
                rollbacks: AtomicU64::new(0),
            }),
        })
    }

    pub fn handle(&self) -> MapHandle {
        MapHandle {
            local: Some(self.shared.pool.register()),
            pause: self.shared.pause.as_ref().map(|p| p.register()),
            shared: self.shared.clone(),
        }
    }

    /// Current timestamp clock value.
    pub fn current_ts(&self) -> u64 {
        self.shared.ts.get()
    }

    /// Advances the timestamp clock, returning the pre-increment value.
    pub fn bump_ts(&self) -> u64 {
        self.shared.ts.fetch_add()
    }

    pub fn stats(&self) -> MapStats {
        MapStats {
            rollbacks: self.shared.rollbacks.load(SeqCst),
            pool: self.shared.pool.stats(),
            timestamp: self.shared.ts.get(),
            epoch: self.shared.pool.current_epoch(),
        }
    }

    pub fn shadow_report(&self) -> Option<ShadowReport> {
        self.shared.pool.shadow_report()
    }

    pub fn pause_control(&self) -> Option<&Arc<PauseControl>> {
        self.shared.pause.as_ref()
    }

    pub fn head(&self) -> NodeRef {
        HEAD
    }

    pub fn tail(&self) -> NodeRef {
        TAIL
    }

    /// Overwrites a node's key in place. Negative-control hook for
    /// invariant probes; breaks the map.
    #[doc(hidden)]
    pub fn corrupt_key(&self, n: NodeRef, key: Key) {
        self.shared.pool.corrupt_key(n, key);
    }

    /// Raw slot read; meaningful only while the caller can rule out
    /// concurrent recycling (quiescence).
    pub fn read_node(&self, n: NodeRef) -> RawNode {
        let pool = &self.shared.pool;
        let (ts, birth) = pool.raw_ts_birth(n);
        let (next, next_version) = pool.raw_next(n);
        RawNode {
            key: pool.raw_key(n),
            value: pool.raw_value(n),
            ts,
            birth,
            next,
            next_version,
            prior: pool.raw_prior(n),
        }
    }

    /// Walks the list under assumed quiescence and returns the reachable
    /// client entries in order. Reachable marked nodes are included: a
    /// removal only takes effect when its node is unlinked.
    pub fn logical_snapshot(&self) -> Vec<(Key, Value)> {
        let pool = &self.shared.pool;
        let mut out = Vec::new();
        let mut n = HEAD;
        loop {
            let (link, _) = pool.raw_next(n);
            match link.node() {
                None => break,
                Some(s) => {
                    let k = pool.raw_key(s);
                    if k != KEY_MAX {
                        out.push((k, pool.raw_value(s)));
                    }
                    n = s;
                }
            }
        }
        out
    }
}

struct FindResult {
    pred: NodeRef,
    pred_birth: u64,
    pred_next: (TaggedLink, u64),
    curr: NodeRef,
    curr_birth: u64,
}

/// Per-thread access to a [`VersionedMap`].
pub struct MapHandle {
    shared: Arc<Shared>,
    local: Option<LocalPool>,
    pause: Option<PauseToken>,
}

struct Ctx<'a> {
    shared: &'a Shared,
    local: &'a mut LocalPool,
    pause: Option<&'a PauseToken>,
}

impl MapHandle {
    fn ctx(&mut self) -> Ctx<'_> {
        Ctx {
            shared: &self.shared,
            local: self.local.as_mut().expect("handle already released"),
            pause: self.pause.as_ref(),
        }
    }

    /// Inserts `(key, value)` unless the key is present; returns the
    /// incumbent value, or `NO_VAL` if the insert took effect.
    pub fn insert(&mut self, key: Key, value: Value) -> Value {
        assert!(key > KEY_MIN && key < KEY_MAX, "key collides with a sentinel");
        assert_ne!(value, NO_VAL, "zero is the reserved absent value");
        let mut ctx = self.ctx();
        let shared = ctx.shared;
        let result = loop {
            let mut g = Guard::new(&shared.pool);
            match ctx.insert_attempt(&mut g, key, value) {
                Ok(v) => break v,
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        };
        ctx.done();
        result
    }

    /// Removes `key`, returning its value, or `NO_VAL` if absent.
    pub fn remove(&mut self, key: Key) -> Value {
        assert!(key > KEY_MIN && key < KEY_MAX, "key collides with a sentinel");
        let mut ctx = self.ctx();
        let shared = ctx.shared;
        let value = loop {
            let mut g = Guard::new(&shared.pool);
            match ctx.remove_attempt(&mut g, key) {
                Ok(None) => {
                    ctx.done();
                    return NO_VAL;
                }
                Ok(Some(v)) => break v,
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        };
        // Post-mark checkpoint: the marked node is ours; rollbacks restart
        // only the physical excision, never the claim.
        loop {
            let mut g = Guard::new(&shared.pool);
            match ctx.find(&mut g, key) {
                Ok(_) => break,
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        }
        ctx.done();
        value
    }

    /// Returns the value under `key`, or `NO_VAL` if absent.
    pub fn contains(&mut self, key: Key) -> Value {
        assert!(key > KEY_MIN && key < KEY_MAX, "key collides with a sentinel");
        let mut ctx = self.ctx();
        let shared = ctx.shared;
        let result = loop {
            let mut g = Guard::new(&shared.pool);
            match ctx.contains_attempt(&mut g, key) {
                Ok(v) => break v,
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        };
        ctx.done();
        result
    }

    /// Collects every `(key, value)` with `low <= key <= high` as of one
    /// timestamp into `out` (cleared first), returning the count. The
    /// buffer grows as needed.
    pub fn range_query(&mut self, low: Key, high: Key, out: &mut Vec<(Key, Value)>) -> usize {
        assert!(low > KEY_MIN && high < KEY_MAX, "range collides with a sentinel");
        assert!(low <= high, "inverted range");
        let mut ctx = self.ctx();
        let shared = ctx.shared;
        let count = loop {
            let mut g = Guard::new(&shared.pool);
            match ctx.range_attempt(&mut g, None, low, high, out) {
                Ok(c) => break c,
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        };
        ctx.done();
        count
    }

    /// Range query at a caller-chosen timestamp. Scripted-scenario hook for
    /// snapshot tests; `ts` must already be in the past.
    pub fn range_query_at(
        &mut self,
        ts: u64,
        low: Key,
        high: Key,
        out: &mut Vec<(Key, Value)>,
    ) -> usize {
        assert!(low > KEY_MIN && high < KEY_MAX, "range collides with a sentinel");
        assert!(low <= high, "inverted range");
        let mut ctx = self.ctx();
        let shared = ctx.shared;
        let count = loop {
            let mut g = Guard::new(&shared.pool);
            match ctx.range_attempt(&mut g, Some(ts), low, high, out) {
                Ok(c) => break c,
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        };
        ctx.done();
        count
    }

    /// Locates `(pred, curr)` with `pred.key < key <= curr.key`, excising
    /// any dead run in between. Exposed for structural tests.
    pub fn find_pair(&mut self, key: Key) -> (NodeRef, NodeRef) {
        assert!(key > KEY_MIN, "find key must exceed the head sentinel");
        let mut ctx = self.ctx();
        let shared = ctx.shared;
        loop {
            let mut g = Guard::new(&shared.pool);
            match ctx.find(&mut g, key) {
                Ok(f) => return (f.pred, f.curr),
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        }
    }

    /// Marks `node`'s next link if clean. Scripted-scenario hook.
    pub fn mark_node(&mut self, node: NodeRef) -> bool {
        let mut ctx = self.ctx();
        let shared = ctx.shared;
        loop {
            let mut g = Guard::new(&shared.pool);
            match ctx.mark(&mut g, node) {
                Ok(done) => return done,
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        }
    }

    /// Runs one trim with `victim = pred.next`, which must be marked.
    /// Scripted-scenario hook; returns whether this call committed.
    pub fn trim_at(&mut self, pred: NodeRef) -> bool {
        let mut ctx = self.ctx();
        let shared = ctx.shared;
        loop {
            let mut g = Guard::new(&shared.pool);
            let attempt = (|| {
                let pred_birth = g.ts_birth(pred)?.1;
                let pred_next = g.next(pred)?;
                if pred_next.0.is_marked_or_flagged() {
                    return Ok(false);
                }
                ctx.trim(&mut g, pred, pred_birth, pred_next)
            })();
            match attempt {
                Ok(done) => return done,
                Err(Rollback) => {
                    shared.rollbacks.fetch_add(1, SeqCst);
                }
            }
        }
    }
}

impl Drop for MapHandle {
    fn drop(&mut self) {
        if let Some(local) = self.local.take() {
            self.shared.pool.release(local);
        }
    }
}

impl Ctx<'_> {
    fn step(&self) {
        if let Some(t) = self.pause {
            t.step();
        }
    }

    fn done(&self) {
        if let Some(t) = self.pause {
            t.op_complete();
        }
    }

    /// Picks the traversal starting point: up to `MAX_ATTEMPTS` index
    /// probes, each validated against the live list, then the head.
    fn traversal_start(
        &mut self,
        g: &mut Guard,
        key: Key,
    ) -> Read<(NodeRef, u64, (TaggedLink, u64))> {
        let mut curr_key = key;
        let mut attempts = MAX_ATTEMPTS;
        while attempts > 0 {
            attempts -= 1;
            let Some(p) = self.shared.index.find_pred(curr_key) else { break };
            let (p_ts, p_birth) = g.ts_birth(p)?;
            let p_next = g.next(p)?;
            let p_key = g.key(p)?;
            if p_key >= key || p_ts == BOT {
                continue;
            }
            if p_next.0.is_marked_or_flagged() {
                curr_key = p_key;
                continue;
            }
            return Ok((p, p_birth, p_next));
        }
        let h_next = g.next(HEAD)?;
        Ok((HEAD, EPOCH_INIT, h_next))
    }

    fn find(&mut self, g: &mut Guard, key: Key) -> Read<FindResult> {
        'retry: loop {
            self.step();
            let (mut pred, mut pred_birth, mut pred_next) = self.traversal_start(g, key)?;
            let Some(mut curr) = pred_next.0.node() else { continue 'retry };
            let mut curr_birth = g.deref_next(curr, pred_next.1)?;
            loop {
                self.step();
                // Skip past a marked run and its flagged end, if any.
                loop {
                    let (link, ver) = g.next(curr)?;
                    if !link.is_marked_or_flagged() {
                        break;
                    }
                    let Some(nxt) = link.node() else { break };
                    curr_birth = g.deref_next(nxt, ver)?;
                    curr = nxt;
                }
                if g.key(curr)? >= key {
                    break;
                }
                pred = curr;
                pred_birth = curr_birth;
                let pn = g.next(pred)?;
                if pn.0.is_marked_or_flagged() {
                    continue 'retry;
                }
                pred_next = pn;
                let Some(c) = pn.0.node() else { continue 'retry };
                curr_birth = g.deref_next(c, pn.1)?;
                curr = c;
            }
            g.publish_ts(pred, &self.shared.ts)?;
            if pred_next.0.node() != Some(curr) {
                // Dead nodes sit between pred and curr; excise them.
                if !self.trim(g, pred, pred_birth, pred_next)? {
                    continue 'retry;
                }
                let pn = g.next(pred)?;
                if pn.0.is_marked_or_flagged() {
                    continue 'retry;
                }
                pred_next = pn;
                let Some(c) = pn.0.node() else { continue 'retry };
                curr_birth = g.deref_next(c, pn.1)?;
                curr = c;
                let (c_link, _) = g.next(curr)?;
                if c_link.is_marked_or_flagged() || g.key(curr)? < key {
                    continue 'retry;
                }
            }
            g.publish_ts(curr, &self.shared.ts)?;
            return Ok(FindResult { pred, pred_birth, pred_next, curr, curr_birth });
        }
    }

    /// Excises the maximal marked run starting at `pred.next` plus its
    /// first clean successor, replacing the latter with a fresh node whose
    /// prior is the run's first node. True iff this call's CAS committed.
    fn trim(
        &mut self,
        g: &mut Guard,
        pred: NodeRef,
        pred_birth: u64,
        pred_next: (TaggedLink, u64),
    ) -> Read<bool> {
        let Some(victim) = pred_next.0.node() else { return Ok(false) };
        let mut curr = victim;
        let mut run: Vec<(NodeRef, Key)> = Vec::new();
        loop {
            self.step();
            let (link, ver) = g.next(curr)?;
            if !link.is_marked() {
                break;
            }
            run.push((curr, g.key(curr)?));
            let Some(nxt) = link.node() else { return Ok(false) };
            g.deref_next(nxt, ver)?;
            curr = nxt;
        }
        if run.is_empty() {
            return Ok(false);
        }
        g.publish_ts(curr, &self.shared.ts)?;
        if !self.flag(g, curr)? {
            let (link, _) = g.next(curr)?;
            if !link.is_flagged() {
                return Ok(false);
            }
        }
        let (f_link, f_ver) = g.next(curr)?;
        let succ = f_link.node();
        let succ_birth = match succ {
            Some(s) => {
                let b = g.deref_next(s, f_ver)?;
                g.publish_ts(s, &self.shared.ts)?;
                b
            }
            None => 0,
        };
        let curr_key = g.key(curr)?;
        let curr_val = g.value(curr)?;
        let succ_link = succ.map_or(TaggedLink::NULL, TaggedLink::to);
        let (new_curr, new_birth) = self.shared.pool.alloc(
            self.local,
            &self.shared.ts,
            curr_key,
            curr_val,
            succ_link,
            succ_birth,
            Some(victim),
        );
        if self.shared.pool.wcas_next(
            pred,
            pred_next,
            (TaggedLink::to(new_curr), pred_birth.max(new_birth)),
        ) {
            self.publish_own_ts(new_curr, new_birth);
            for (n, k) in &run {
                self.shared.index.remove(*k);
                self.shared.pool.retire(self.local, &self.shared.ts, *n);
            }
            self.shared.index.update(curr_key, new_curr, new_birth);
            self.shared.pool.retire(self.local, &self.shared.ts, curr);
            Ok(true)
        } else {
            self.shared.pool.retire(self.local, &self.shared.ts, new_curr);
            Ok(false)
        }
    }

    /// Publishes the timestamp of a node this thread just created. No
    /// guard: if the node was already unlinked and recycled, its birth
    /// changed and the CAS fails harmlessly.
    fn publish_own_ts(&self, n: NodeRef, birth: u64) {
        let (ts, b) = self.shared.pool.raw_ts_birth(n);
        if ts == BOT && b == birth {
            let now = self.shared.ts.get();
            let _ = self.shared.pool.wcas_ts(n, (BOT, birth), (now, birth));
        }
    }

    fn mark(&mut self, g: &mut Guard, n: NodeRef) -> Read<bool> {
        let (link, ver) = g.next(n)?;
        if link.is_marked_or_flagged() {
            return Ok(false);
        }
        Ok(self.shared.pool.wcas_next(n, (link, ver), (link.with_mark(), ver)))
    }

    fn flag(&mut self, g: &mut Guard, n: NodeRef) -> Read<bool> {
        let (link, ver) = g.next(n)?;
        if link.is_marked_or_flagged() {
            return Ok(false);
        }
        Ok(self.shared.pool.wcas_next(n, (link, ver), (link.with_flag(), ver)))
    }

    fn insert_attempt(&mut self, g: &mut Guard, key: Key, value: Value) -> Read<Value> {
        loop {
            self.step();
            let f = self.find(g, key)?;
            if g.key(f.curr)? == key {
                return Ok(g.value(f.curr)?);
            }
            let (new, new_birth) = self.shared.pool.alloc(
                self.local,
                &self.shared.ts,
                key,
                value,
                TaggedLink::to(f.curr),
                f.curr_birth,
                Some(f.curr),
            );
            if self.shared.pool.wcas_next(
                f.pred,
                f.pred_next,
                (TaggedLink::to(new), f.pred_birth.max(new_birth)),
            ) {
                self.publish_own_ts(new, new_birth);
                self.shared.index.insert(key, new, new_birth);
                return Ok(NO_VAL);
            }
            self.shared.pool.retire(self.local, &self.shared.ts, new);
        }
    }

    fn remove_attempt(&mut self, g: &mut Guard, key: Key) -> Read<Option<Value>> {
        loop {
            self.step();
            let f = self.find(g, key)?;
            if g.key(f.curr)? != key {
                return Ok(None);
            }
            let value = g.value(f.curr)?;
            if !self.mark(g, f.curr)? {
                continue;
            }
            return Ok(Some(value));
        }
    }

    fn contains_attempt(&mut self, g: &mut Guard, key: Key) -> Read<Value> {
        let f = self.find(g, key)?;
        if g.key(f.curr)? == key {
            Ok(g.value(f.curr)?)
        } else {
            Ok(NO_VAL)
        }
    }

    fn range_attempt(
        &mut self,
        g: &mut Guard,
        fixed_ts: Option<u64>,
        low: Key,
        high: Key,
        out: &mut Vec<(Key, Value)>,
    ) -> Read<usize> {
        out.clear();
        let mut ts = fixed_ts.unwrap_or_else(|| self.shared.ts.fetch_add());
        let mut seek_key = low;
        let mut curr;
        // Locate a starting node no newer than ts and no greater than low,
        // re-seeding ts when a prior walk overshoots past the range start.
        loop {
            self.step();
            let f = self.find(g, seek_key)?;
            let mut pred = f.pred;
            let mut pred_birth = f.pred_birth;
            seek_key = g.key(pred)?;
            loop {
                let (p_ts, _) = g.ts_birth(pred)?;
                if p_ts <= ts {
                    break;
                }
                match g.deref_prior(pred, pred_birth)? {
                    Some((p, pb)) => {
                        pred = p;
                        pred_birth = pb;
                    }
                    None => return Err(Rollback),
                }
            }
            if g.key(pred)? <= low {
                curr = pred;
                break;
            }
            if fixed_ts.is_none() {
                ts = self.shared.ts.get() - 1;
            }
        }
        // Walk the snapshot forward, dropping hops newer than ts via prior
        // chains, and collect the range.
        loop {
            let k = g.key(curr)?;
            if k > high {
                break;
            }
            if k >= low {
                out.push((k, g.value(curr)?));
            }
            self.step();
            let (link, ver) = g.next(curr)?;
            let Some(first) = link.node() else { return Err(Rollback) };
            let mut s = first;
            let mut s_birth = g.deref_next(first, ver)?;
            g.publish_ts(s, &self.shared.ts)?;
            loop {
                let (s_ts, _) = g.ts_birth(s)?;
                if s_ts <= ts {
                    break;
                }
                match g.deref_prior(s, s_birth)? {
                    Some((p, pb)) => {
                        s = p;
                        s_birth = pb;
                    }
                    None => return Err(Rollback),
                }
            }
            curr = s;
        }
        Ok(out.len())
    }
}
