//! The global-lock baseline: one sequential heap behind one mutex.
//!
//! Every operation runs inside a single critical section, so the queue
//! is linearizable by construction. It is the reference point the other
//! variants are benchmarked against.

use std::sync::Mutex;

use crate::queue::{ConcurrentPriorityQueue, QueueHandle};
use crate::{Entry, InsertError, PopResult, SeqHeap};

#[derive(Debug, Default)]
pub struct GlobalLockQueue {
    heap: Mutex<SeqHeap>,
}

impl GlobalLockQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.heap.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ConcurrentPriorityQueue for GlobalLockQueue {
    fn register(&self) -> Box<dyn QueueHandle + '_> {
        Box::new(GlobalLockHandle { queue: self })
    }
}

struct GlobalLockHandle<'a> {
    queue: &'a GlobalLockQueue,
}

impl QueueHandle for GlobalLockHandle<'_> {
    fn insert(&mut self, e: Entry) -> Result<(), InsertError> {
        self.queue.heap.lock().unwrap().insert(e);
        Ok(())
    }

    fn delete_min(&mut self) -> PopResult {
        self.queue.heap.lock().unwrap().delete_min()
    }
}
