//! The pluggable fast-index contract.
//!
//! An index maps keys to list nodes so that `find` can start its traversal
//! near the target instead of at the head. It is purely advisory: every
//! candidate it returns is re-validated against the list, and a map with the
//! index disabled behaves identically. Staleness is therefore tolerated by
//! construction.

use crate::tagged::NodeRef;
use crate::Key;

pub mod skiplist;

pub use skiplist::SkipListIndex;

/// Bound on index probes per traversal start before falling back to head.
pub const MAX_ATTEMPTS: usize = 5;

/// Index selection at map construction.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Default)]
pub enum IndexChoice {
    /// Every traversal starts at the head sentinel.
    #[default]
    None,
    /// Lock-free skip list.
    SkipList,
}

/// Operations an index must provide. All methods are best-effort: a lost
/// race or a missed entry costs traversal time, never correctness.
pub trait FastIndex: Send + Sync {
    /// Records `node` (with the birth epoch it had when indexed) under `key`.
    fn insert(&self, key: Key, node: NodeRef, birth: u64);

    /// Drops the entry for `key`, if any.
    fn remove(&self, key: Key);

    /// Replaces the entry for `key` with `node`, refusing candidates whose
    /// captured birth epoch is lower than the incumbent's (a stale update
    /// must not displace a fresher replacement).
    fn update(&self, key: Key, node: NodeRef, birth: u64);

    /// Returns an indexed list node with key strictly smaller than `key`,
    /// or `None` when no candidate is available.
    fn find_pred(&self, key: Key) -> Option<NodeRef>;
}

/// The disabled index: never has a candidate.
pub struct NoIndex;

impl FastIndex for NoIndex {
    fn insert(&self, _key: Key, _node: NodeRef, _birth: u64) {}
    fn remove(&self, _key: Key) {}
    fn update(&self, _key: Key, _node: NodeRef, _birth: u64) {}
    fn find_pred(&self, _key: Key) -> Option<NodeRef> {
        None
    }
}
