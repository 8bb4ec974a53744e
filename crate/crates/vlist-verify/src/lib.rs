//! Verification toolkit for the versioned map: a sequential oracle, a
//! small-history linearizability checker, structural invariant probes,
//! reclamation shadow-log auditing, and the stress drivers behind the
//! acceptance suite.

pub mod audit;
pub mod checker;
pub mod history;
pub mod oracle;
pub mod probe;
pub mod stress;

pub use checker::check_linearizable;
pub use history::{record_history, Completed};
pub use oracle::{Op, Outcome, OracleMap};
