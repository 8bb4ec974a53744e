//! A lock-free ordered map with multi-version range queries.
//!
//! The map is a sorted linked list in which deletion happens by replacement:
//! a run of marked nodes plus one flagged successor is unlinked by a single
//! wide CAS that installs a fresh copy of the flagged node. Every node keeps
//! an immutable `prior` link to the previous version of its position, so
//! range queries can walk backwards in time to a consistent snapshot chosen
//! by a logical timestamp.
//!
//! Memory is never freed. Nodes live in a fixed slot pool and are recycled
//! through version-based reclamation: readers validate birth epochs instead
//! of protecting nodes, and restart their operation from a checkpoint when a
//! slot was recycled under them.

pub mod clock;
pub mod index;
pub mod list;
pub mod pause;
pub mod reclaim;
pub mod tagged;

pub use clock::{EpochClock, TimestampClock, BOT, EPOCH_INIT, TS_INIT};
pub use index::{FastIndex, IndexChoice, NoIndex, SkipListIndex, MAX_ATTEMPTS};
pub use list::{MapConfig, MapHandle, MapStats, RawNode, VersionedMap};
pub use pause::{PauseControl, PauseToken};
pub use reclaim::{Guard, Rollback, ShadowReport};
pub use tagged::{NodeRef, TaggedLink};

/// Map keys. The extreme representable values are reserved for the two
/// sentinels and must not be used by clients.
pub type Key = i64;

/// Map values. Zero is reserved as the "absent" sentinel.
pub type Value = u64;

/// Returned by insert/remove/contains to mean "key absent".
pub const NO_VAL: Value = 0;

/// Head sentinel key ("minus infinity").
pub const KEY_MIN: Key = i64::MIN;

/// Tail sentinel key ("plus infinity").
pub const KEY_MAX: Key = i64::MAX;

/// Errors reported while building a [`VersionedMap`].
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("this platform has no lock-free 128-bit compare-exchange")]
    NoWideCas,
    #[error("pool of {slots} slots is too small (need at least {min})")]
    PoolTooSmall { slots: usize, min: usize },
    #[error("batch capacity must be at least 1")]
    BadBatchCapacity,
}
