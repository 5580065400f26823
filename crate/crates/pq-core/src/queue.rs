//! The handle-based concurrent priority-queue contract.
//!
//! Queues are shared (`&Q` across threads); each participating thread
//! registers once and drives the queue through its own [`QueueHandle`].
//! Registration is explicit because several variants keep per-thread
//! state (epoch-reclamation slots, local lists) sized to a fixed thread
//! set.

use crate::counters::CounterSnapshot;
use crate::{Entry, InsertError, PopResult};

/// A shared concurrent priority queue.
pub trait ConcurrentPriorityQueue: Send + Sync {
    /// Registers the calling thread and returns its operation handle.
    fn register(&self) -> Box<dyn QueueHandle + '_>;

    /// Snapshot of the queue's instrumentation counters.
    fn counters(&self) -> CounterSnapshot {
        CounterSnapshot::default()
    }
}

/// Per-thread operation handle. Handles are not shared between threads.
pub trait QueueHandle {
    fn insert(&mut self, e: Entry) -> Result<(), InsertError>;
    fn delete_min(&mut self) -> PopResult;
}

impl dyn QueueHandle + '_ {
    /// Pops until `Empty`, returning everything removed. Test helper.
    pub fn drain(&mut self) -> Vec<Entry> {
        let mut out = Vec::new();
        while let PopResult::Item(e) = self.delete_min() {
            out.push(e);
        }
        out
    }
}
