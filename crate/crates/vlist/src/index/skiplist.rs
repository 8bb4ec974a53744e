//! Lock-free skip-list index.
//!
//! Towers live in their own fixed pool and are recycled with plain
//! version-based reclamation: each tower carries a birth epoch, retired
//! towers record a retire epoch, and reusing a slot retired in the current
//! epoch ticks the (shared) epoch clock first. Readers record the epoch at
//! the start of a search and restart when it moves or when a tower's birth
//! postdates it.
//!
//! Everything here is best-effort. Bounded retry budgets make every path
//! terminate; when a budget runs out the operation simply gives up, which
//! the list tolerates because index answers are re-validated there.

use std::cell::RefCell;
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering::SeqCst};
use std::sync::Arc;

use portable_atomic::AtomicU128;
use rand::rngs::SmallRng;
use rand::{RngCore, SeedableRng};

use crate::clock::EpochClock;
use crate::index::FastIndex;
use crate::tagged::NodeRef;
use crate::{Key, KEY_MAX, KEY_MIN};

pub const MAX_LEVEL: usize = 20;

const MARK: u64 = 0x1;

/// Restarts allowed per search before giving up.
const RESTART_CAP: usize = 64;
/// Whole-operation retries for insert/remove.
const OP_CAP: usize = 8;
/// Searches run to confirm a removed tower is unlinked before reuse.
const CONFIRM_CAP: usize = 16;
/// Link attempts per upper level during insert.
const LINK_CAP: usize = 4;

fn pack(lo: u64, hi: u64) -> u128 {
    (lo as u128) | ((hi as u128) << 64)
}

fn unpack(w: u128) -> (u64, u64) {
    (w as u64, (w >> 64) as u64)
}

fn link_to(idx: usize) -> u64 {
    ((idx as u64) + 1) << 2
}

fn link_ref(word: u64) -> Option<usize> {
    let w = word & !0x3;
    if w == 0 {
        None
    } else {
        Some(((w >> 2) - 1) as usize)
    }
}

#[repr(C, align(16))]
struct Tower {
    birth: AtomicU64,
    retire_epoch: AtomicU64,
    key: AtomicI64,
    height: AtomicU64,
    /// (list node index + 1, captured node birth epoch).
    entry: AtomicU128,
    /// Per level: (tower link word with mark bit, version).
    nexts: [AtomicU128; MAX_LEVEL],
    free_next: AtomicU64,
}

impl Tower {
    fn new() -> Self {
        Tower {
            birth: AtomicU64::new(0),
            retire_epoch: AtomicU64::new(0),
            key: AtomicI64::new(0),
            height: AtomicU64::new(0),
            entry: AtomicU128::new(0),
            nexts: std::array::from_fn(|_| AtomicU128::new(0)),
            free_next: AtomicU64::new(0),
        }
    }
}

struct SearchResult {
    preds: [usize; MAX_LEVEL],
    pred_pairs: [(u64, u64); MAX_LEVEL],
    succs: [usize; MAX_LEVEL],
    found: Option<usize>,
    saw_watch: bool,
}

pub struct SkipListIndex {
    towers: Box<[Tower]>,
    free_top: AtomicU64,
    epoch: Arc<EpochClock>,
    seed: u64,
    head: usize,
    tail: usize,
}

thread_local! {
    static LEVEL_RNG: RefCell<Option<SmallRng>> = const { RefCell::new(None) };
}

impl SkipListIndex {
    /// `slots` is the tower pool size (two are taken by sentinels);
    /// `head_entry` is the list node the head tower answers with.
    pub fn new(slots: usize, epoch: Arc<EpochClock>, seed: u64, head_entry: NodeRef) -> Self {
        let slots = slots.max(4);
        let index = SkipListIndex {
            towers: (0..slots).map(|_| Tower::new()).collect(),
            free_top: AtomicU64::new(0),
            epoch,
            seed,
            head: 0,
            tail: 1,
        };
        let tail = &index.towers[1];
        tail.key.store(KEY_MAX, SeqCst);
        tail.height.store(MAX_LEVEL as u64, SeqCst);
        let head = &index.towers[0];
        head.key.store(KEY_MIN, SeqCst);
        head.height.store(MAX_LEVEL as u64, SeqCst);
        head.entry
            .store(pack(head_entry.index() as u64 + 1, 0), SeqCst);
        for lvl in 0..MAX_LEVEL {
            head.nexts[lvl].store(pack(link_to(1), 0), SeqCst);
        }
        for idx in (2..slots).rev() {
            index.push_free(idx);
        }
        index
    }

    fn push_free(&self, idx: usize) {
        loop {
            let top = self.free_top.load(SeqCst);
            self.towers[idx].free_next.store(top & 0xffff_ffff, SeqCst);
            let new = ((top >> 32).wrapping_add(1) << 32) | (idx as u64 + 1);
            if self.free_top.compare_exchange(top, new, SeqCst, SeqCst).is_ok() {
                return;
            }
        }
    }

    fn pop_free(&self) -> Option<usize> {
        loop {
            let top = self.free_top.load(SeqCst);
            let idx1 = top & 0xffff_ffff;
            if idx1 == 0 {
                return None;
            }
            let idx = (idx1 - 1) as usize;
            let next = self.towers[idx].free_next.load(SeqCst);
            let new = ((top >> 32).wrapping_add(1) << 32) | (next & 0xffff_ffff);
            if self.free_top.compare_exchange(top, new, SeqCst, SeqCst).is_ok() {
                return Some(idx);
            }
        }
    }

    fn level_draw(&self) -> usize {
        LEVEL_RNG.with(|cell| {
            let mut slot = cell.borrow_mut();
            let rng = slot.get_or_insert_with(|| {
                let tid = std::thread::current().id();
                let mut h = std::collections::hash_map::DefaultHasher::new();
                use std::hash::{Hash, Hasher};
                tid.hash(&mut h);
                SmallRng::seed_from_u64(self.seed ^ h.finish())
            });
            let bits = rng.next_u32() | (1 << (MAX_LEVEL as u32 - 1));
            (bits.trailing_zeros() + 1) as usize
        })
    }

    fn alloc_tower(&self, key: Key, node: NodeRef, node_birth: u64) -> Option<usize> {
        let idx = self.pop_free()?;
        let tower = &self.towers[idx];
        let stamp = tower.retire_epoch.load(SeqCst);
        loop {
            let cur = self.epoch.current();
            if stamp != cur || self.epoch.advance_past(cur) {
                break;
            }
        }
        let birth = self.epoch.current();
        tower.birth.store(birth, SeqCst);
        tower.key.store(key, SeqCst);
        tower
            .entry
            .store(pack(node.index() as u64 + 1, node_birth), SeqCst);
        Some(idx)
    }

    fn free_tower(&self, idx: usize) {
        self.towers[idx].retire_epoch.store(self.epoch.current(), SeqCst);
        self.push_free(idx);
    }

    /// One validated read of a tower's (key, level link). Fails when the
    /// epoch moved or the tower's birth postdates `e`.
    fn read_level(&self, t: usize, lvl: usize, e: u64) -> Result<(Key, u64, u64), ()> {
        let tower = &self.towers[t];
        let key = tower.key.load(SeqCst);
        let (word, ver) = unpack(tower.nexts[lvl].load(SeqCst));
        if tower.birth.load(SeqCst) > e || self.epoch.current() != e {
            return Err(());
        }
        Ok((key, word, ver))
    }

    fn search(&self, key: Key, watch: Option<usize>) -> Option<SearchResult> {
        'restart: for _ in 0..RESTART_CAP {
            let e = self.epoch.current();
            let mut out = SearchResult {
                preds: [self.head; MAX_LEVEL],
                pred_pairs: [(0, 0); MAX_LEVEL],
                succs: [self.tail; MAX_LEVEL],
                found: None,
                saw_watch: false,
            };
            let mut pred = self.head;
            for lvl in (0..MAX_LEVEL).rev() {
                let (_, mut pw, mut pv) = match self.read_level(pred, lvl, e) {
                    Ok(r) => r,
                    Err(()) => continue 'restart,
                };
                loop {
                    let Some(curr) = link_ref(pw) else {
                        // A null link above the tail means a stale tower.
                        continue 'restart;
                    };
                    if watch == Some(curr) {
                        out.saw_watch = true;
                    }
                    let (ck, cw, cv) = match self.read_level(curr, lvl, e) {
                        Ok(r) => r,
                        Err(()) => continue 'restart,
                    };
                    if cw & MARK != 0 {
                        // Snip the dead tower out of this level.
                        let clean = cw & !MARK;
                        if self.towers[pred].nexts[lvl]
                            .compare_exchange(pack(pw, pv), pack(clean, e), SeqCst, SeqCst)
                            .is_err()
                        {
                            continue 'restart;
                        }
                        pw = clean;
                        pv = e;
                        continue;
                    }
                    if ck < key {
                        pred = curr;
                        pw = cw;
                        pv = cv;
                        continue;
                    }
                    out.preds[lvl] = pred;
                    out.pred_pairs[lvl] = (pw, pv);
                    out.succs[lvl] = curr;
                    if lvl == 0 && ck == key {
                        out.found = Some(curr);
                    }
                    break;
                }
            }
            return Some(out);
        }
        None
    }

    /// Replaces a tower's list-node entry if the candidate's captured birth
    /// epoch is not older than the incumbent's.
    fn bump_entry(&self, t: usize, node: NodeRef, birth: u64) {
        let tower = &self.towers[t];
        loop {
            let cur = tower.entry.load(SeqCst);
            let (_, incumbent_birth) = unpack(cur);
            if birth < incumbent_birth {
                return;
            }
            if tower
                .entry
                .compare_exchange(cur, pack(node.index() as u64 + 1, birth), SeqCst, SeqCst)
                .is_ok()
            {
                return;
            }
        }
    }

    fn insert_impl(&self, key: Key, node: NodeRef, birth: u64) {
        'op: for _ in 0..OP_CAP {
            let Some(s) = self.search(key, None) else { return };
            if let Some(t) = s.found {
                self.bump_entry(t, node, birth);
                return;
            }
            let Some(tower_idx) = self.alloc_tower(key, node, birth) else { return };
            let tower = &self.towers[tower_idx];
            let height = self.level_draw();
            tower.height.store(height as u64, SeqCst);
            let e = self.epoch.current();
            for lvl in 0..height {
                tower.nexts[lvl].store(pack(link_to(s.succs[lvl]), e), SeqCst);
            }
            let (pw, pv) = s.pred_pairs[0];
            if self.towers[s.preds[0]].nexts[0]
                .compare_exchange(pack(pw, pv), pack(link_to(tower_idx), e), SeqCst, SeqCst)
                .is_err()
            {
                self.free_tower(tower_idx);
                continue 'op;
            }
            // Upper levels are pure acceleration; give each a few tries.
            for lvl in 1..height {
                let mut linked = false;
                for _ in 0..LINK_CAP {
                    let Some(s2) = self.search(key, None) else { break };
                    if s2.found != Some(tower_idx) {
                        // Concurrently removed (or lost); stop linking.
                        return;
                    }
                    let (word, _) = unpack(tower.nexts[lvl].load(SeqCst));
                    if word & MARK != 0 {
                        return;
                    }
                    let e2 = self.epoch.current();
                    tower.nexts[lvl].store(pack(link_to(s2.succs[lvl]), e2), SeqCst);
                    let (pw, pv) = s2.pred_pairs[lvl];
                    if self.towers[s2.preds[lvl]].nexts[lvl]
                        .compare_exchange(
                            pack(pw, pv),
                            pack(link_to(tower_idx), e2),
                            SeqCst,
                            SeqCst,
                        )
                        .is_ok()
                    {
                        linked = true;
                        break;
                    }
                }
                if !linked {
                    return;
                }
            }
            return;
        }
    }

    fn remove_impl(&self, key: Key) {
        for _ in 0..OP_CAP {
            let Some(s) = self.search(key, None) else { return };
            let Some(t) = s.found else { return };
            let tower = &self.towers[t];
            let height = (tower.height.load(SeqCst) as usize).clamp(1, MAX_LEVEL);
            // Mark every level, bottom level last; whoever marks level 0
            // owns the physical removal and the eventual reuse.
            for lvl in (1..height).rev() {
                loop {
                    let pair = tower.nexts[lvl].load(SeqCst);
                    let (word, ver) = unpack(pair);
                    if word & MARK != 0 {
                        break;
                    }
                    if tower.nexts[lvl]
                        .compare_exchange(pair, pack(word | MARK, ver), SeqCst, SeqCst)
                        .is_ok()
                    {
                        break;
                    }
                }
            }
            let mut we_own = false;
            loop {
                let pair = tower.nexts[0].load(SeqCst);
                let (word, ver) = unpack(pair);
                if word & MARK != 0 {
                    break;
                }
                if tower.nexts[0]
                    .compare_exchange(pair, pack(word | MARK, ver), SeqCst, SeqCst)
                    .is_ok()
                {
                    we_own = true;
                    break;
                }
            }
            if we_own {
                for _ in 0..CONFIRM_CAP {
                    match self.search(key, Some(t)) {
                        Some(s2) if !s2.saw_watch => {
                            self.free_tower(t);
                            return;
                        }
                        _ => {}
                    }
                }
                // Never confirmed unlinked: leak the tower rather than risk
                // recycling it while still reachable.
            }
            return;
        }
    }
}

impl FastIndex for SkipListIndex {
    fn insert(&self, key: Key, node: NodeRef, birth: u64) {
        self.insert_impl(key, node, birth);
    }

    fn remove(&self, key: Key) {
        self.remove_impl(key);
    }

    fn update(&self, key: Key, node: NodeRef, birth: u64) {
        self.insert_impl(key, node, birth);
    }

    fn find_pred(&self, key: Key) -> Option<NodeRef> {
        let e = self.epoch.current();
        let s = self.search(key, None)?;
        let t = s.preds[0];
        let (lo, _) = unpack(self.towers[t].entry.load(SeqCst));
        if self.towers[t].birth.load(SeqCst) > e || lo == 0 {
            return None;
        }
        Some(NodeRef::from_index((lo - 1) as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index() -> SkipListIndex {
        SkipListIndex::new(256, Arc::new(EpochClock::new()), 7, NodeRef::from_index(0))
    }

    #[test]
    fn empty_index_answers_head_entry() {
        let idx = index();
        assert_eq!(idx.find_pred(10), Some(NodeRef::from_index(0)));
    }

    #[test]
    fn find_pred_returns_greatest_smaller_key() {
        let idx = index();
        for (k, n) in [(3, 13), (9, 19), (20, 30)] {
            idx.insert(k, NodeRef::from_index(n), 2);
        }
        assert_eq!(idx.find_pred(15), Some(NodeRef::from_index(19)));
        assert_eq!(idx.find_pred(9), Some(NodeRef::from_index(13)));
        assert_eq!(idx.find_pred(100), Some(NodeRef::from_index(30)));
        assert_eq!(idx.find_pred(3), Some(NodeRef::from_index(0)));
    }

    #[test]
    fn remove_drops_entry() {
        let idx = index();
        idx.insert(5, NodeRef::from_index(15), 2);
        idx.insert(8, NodeRef::from_index(18), 2);
        idx.remove(5);
        assert_eq!(idx.find_pred(8), Some(NodeRef::from_index(0)));
        assert_eq!(idx.find_pred(9), Some(NodeRef::from_index(18)));
    }

    #[test]
    fn stale_update_is_refused() {
        let idx = index();
        idx.insert(5, NodeRef::from_index(15), 4);
        idx.update(5, NodeRef::from_index(99), 3);
        assert_eq!(idx.find_pred(6), Some(NodeRef::from_index(15)));
        idx.update(5, NodeRef::from_index(42), 5);
        assert_eq!(idx.find_pred(6), Some(NodeRef::from_index(42)));
    }

    #[test]
    fn towers_are_recycled() {
        let idx = SkipListIndex::new(8, Arc::new(EpochClock::new()), 7, NodeRef::from_index(0));
        for round in 0..100 {
            idx.insert(round % 5 + 1, NodeRef::from_index(7), 2);
            idx.remove(round % 5 + 1);
        }
        idx.insert(3, NodeRef::from_index(9), 2);
        assert_eq!(idx.find_pred(4), Some(NodeRef::from_index(9)));
    }
}
