//! Shared contract for the concurrent priority-queue suite.
//!
//! This crate defines the value types every queue variant stores and
//! returns ([`Entry`], [`PopResult`]), the handle-based concurrent queue
//! traits, a sequential binary-heap oracle ([`SeqHeap`]) used as the
//! reference implementation in tests, and the [`GlobalLockQueue`]
//! baseline (the sequential heap behind a single mutex).

pub mod counters;
pub mod globallock;
pub mod heap;
pub mod queue;
pub mod yieldpoint;

pub use counters::{CounterSnapshot, OpCounters};
pub use globallock::GlobalLockQueue;
pub use heap::{MinHeap, SeqHeap};
pub use queue::{ConcurrentPriorityQueue, QueueHandle};

use thiserror::Error;

/// A keyed element stored by every queue variant.
///
/// Smaller keys have higher priority. Keys are drawn from the full
/// unsigned 32-bit range and duplicates are permitted. The payload is an
/// opaque fixed-size token that travels with the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Entry {
    pub key: u32,
    pub payload: u64,
}

impl Entry {
    pub fn new(key: u32, payload: u64) -> Self {
        Entry { key, payload }
    }

    /// Entry whose payload just echoes the key; convenient in tests.
    pub fn from_key(key: u32) -> Self {
        Entry {
            key,
            payload: key as u64,
        }
    }
}

/// Outcome of a `delete_min` call.
///
/// `Empty` is a valid outcome, not an error: it means the operation
/// observed no removable item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopResult {
    Item(Entry),
    Empty,
}

impl PopResult {
    pub fn is_empty(&self) -> bool {
        matches!(self, PopResult::Empty)
    }

    pub fn into_option(self) -> Option<Entry> {
        match self {
            PopResult::Item(e) => Some(e),
            PopResult::Empty => None,
        }
    }
}

/// Errors reported by `insert`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InsertError {
    /// Fixed-capacity queues reject inserts once full.
    #[error("queue capacity exceeded")]
    CapacityExceeded,
}
