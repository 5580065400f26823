//! Lightweight instrumentation counters shared by the queue variants.

use std::sync::atomic::{AtomicU64, Ordering::Relaxed};

/// Relaxed atomic counters updated on slow paths (failed atomic updates,
/// restructurings, resprays). Cheap enough to keep enabled in benchmarks.
#[derive(Debug, Default)]
pub struct OpCounters {
    pub cas_failures: AtomicU64,
    pub restructures: AtomicU64,
    pub resprays: AtomicU64,
}

impl OpCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_cas_failure(&self) {
        self.cas_failures.fetch_add(1, Relaxed);
    }

    pub fn record_restructure(&self) {
        self.restructures.fetch_add(1, Relaxed);
    }

    pub fn record_respray(&self) {
        self.resprays.fetch_add(1, Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            cas_failures: self.cas_failures.load(Relaxed),
            restructures: self.restructures.load(Relaxed),
            resprays: self.resprays.load(Relaxed),
        }
    }
}

/// Point-in-time copy of [`OpCounters`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CounterSnapshot {
    pub cas_failures: u64,
    pub restructures: u64,
    pub resprays: u64,
}
