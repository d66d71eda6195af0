//! Versioned actor parameters published by the learner.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use aeddpg_core::{param_hash, DenseNet};

#[derive(Debug, Clone)]
pub struct ParamSnapshot {
    pub version: u64,
    pub actor: DenseNet,
    pub checksum: u64,
}

impl ParamSnapshot {
    pub fn new(version: u64, actor: DenseNet) -> Self {
        let checksum = param_hash(actor.params());
        Self {
            version,
            actor,
            checksum,
        }
    }

    pub fn is_intact(&self) -> bool {
        param_hash(self.actor.params()) == self.checksum
    }
}

/// Single-writer slot. Readers poll the version atomically and only take the
/// lock when it has moved, so the common read path is one atomic load.
#[derive(Debug)]
pub struct SnapshotSlot {
    version: AtomicU64,
    current: Mutex<Arc<ParamSnapshot>>,
}

impl SnapshotSlot {
    pub fn new(actor: DenseNet) -> Self {
        Self {
            version: AtomicU64::new(0),
            current: Mutex::new(Arc::new(ParamSnapshot::new(0, actor))),
        }
    }

    pub fn version(&self) -> u64 {
        self.version.load(Ordering::Acquire)
    }

    pub fn load(&self) -> Arc<ParamSnapshot> {
        self.current.lock().expect("snapshot lock poisoned").clone()
    }

    /// Publishes a copy of `actor` and returns its version.
    pub fn publish(&self, actor: &DenseNet) -> u64 {
        let mut cur = self.current.lock().expect("snapshot lock poisoned");
        let version = cur.version + 1;
        *cur = Arc::new(ParamSnapshot::new(version, actor.clone()));
        self.version.store(version, Ordering::Release);
        version
    }

    /// Replaces `held` with the newest snapshot if one was published since.
    /// Panics if the fetched snapshot fails its checksum.
    pub fn refresh(&self, held: &mut Arc<ParamSnapshot>) -> bool {
        if self.version() == held.version {
            return false;
        }
        let next = self.load();
        assert!(next.is_intact(), "snapshot {} failed its checksum", next.version);
        *held = next;
        true
    }
}
