//! Cooperative suspension hooks for scheduler-style tests.
//!
//! When enabled on a map, every operation loop calls [`PauseToken::step`].
//! A coordinator can then suspend all registered threads except one at an
//! arbitrary point and count how many steps the surviving thread needs to
//! finish its current operation. Production configurations carry no control
//! and the hooks reduce to a single atomic load.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering::SeqCst};
use std::sync::{Arc, Condvar, Mutex};

struct ThreadState {
    steps: AtomicU64,
    ops_completed: AtomicU64,
    parked: AtomicBool,
}

/// Shared pause controller; one per map when enabled.
pub struct PauseControl {
    pausing: AtomicBool,
    allowed: AtomicUsize,
    threads: Mutex<Vec<Arc<ThreadState>>>,
    gate: Mutex<()>,
    cv: Condvar,
}

impl PauseControl {
    pub fn new() -> Arc<PauseControl> {
        Arc::new(PauseControl {
            pausing: AtomicBool::new(false),
            allowed: AtomicUsize::new(usize::MAX),
            threads: Mutex::new(Vec::new()),
            gate: Mutex::new(()),
            cv: Condvar::new(),
        })
    }

    pub(crate) fn register(self: &Arc<Self>) -> PauseToken {
        let state = Arc::new(ThreadState {
            steps: AtomicU64::new(0),
            ops_completed: AtomicU64::new(0),
            parked: AtomicBool::new(false),
        });
        let mut threads = self.threads.lock().unwrap();
        threads.push(state.clone());
        PauseToken { ctl: self.clone(), id: threads.len() - 1, state }
    }

    /// Suspends every registered thread except `survivor` at its next step.
    pub fn suspend_all_except(&self, survivor: usize) {
        self.allowed.store(survivor, SeqCst);
        self.pausing.store(true, SeqCst);
    }

    pub fn resume_all(&self) {
        self.pausing.store(false, SeqCst);
        let _gate = self.gate.lock().unwrap();
        self.cv.notify_all();
    }

    pub fn steps(&self, id: usize) -> u64 {
        self.threads.lock().unwrap()[id].steps.load(SeqCst)
    }

    pub fn ops_completed(&self, id: usize) -> u64 {
        self.threads.lock().unwrap()[id].ops_completed.load(SeqCst)
    }

    pub fn registered(&self) -> usize {
        self.threads.lock().unwrap().len()
    }
}

/// Per-thread handle into a [`PauseControl`].
pub struct PauseToken {
    ctl: Arc<PauseControl>,
    id: usize,
    state: Arc<ThreadState>,
}

impl PauseToken {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Called once per retry-loop iteration inside operations. Parks the
    /// thread if a suspension is in effect for it.
    pub fn step(&self) {
        self.state.steps.fetch_add(1, SeqCst);
        if self.ctl.pausing.load(SeqCst) && self.ctl.allowed.load(SeqCst) != self.id {
            self.state.parked.store(true, SeqCst);
            let mut gate = self.ctl.gate.lock().unwrap();
            while self.ctl.pausing.load(SeqCst) && self.ctl.allowed.load(SeqCst) != self.id {
                gate = self.ctl.cv.wait(gate).unwrap();
            }
            self.state.parked.store(false, SeqCst);
        }
    }

    /// Called at the end of every completed public operation.
    pub fn op_complete(&self) {
        self.state.ops_completed.fetch_add(1, SeqCst);
    }
}
