//! A deliberately wrong queue for validating the checkers: when two or
//! more items are present, `delete_min` returns the second smallest.

use std::sync::Mutex;

use pq_core::{ConcurrentPriorityQueue, Entry, InsertError, PopResult, QueueHandle, SeqHeap};

#[derive(Debug, Default)]
pub struct SecondMinQueue {
    heap: Mutex<SeqHeap>,
}

impl SecondMinQueue {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ConcurrentPriorityQueue for SecondMinQueue {
    fn register(&self) -> Box<dyn QueueHandle + '_> {
        Box::new(SecondMinHandle { queue: self })
    }
}

struct SecondMinHandle<'a> {
    queue: &'a SecondMinQueue,
}

impl QueueHandle for SecondMinHandle<'_> {
    fn insert(&mut self, e: Entry) -> Result<(), InsertError> {
        self.queue.heap.lock().unwrap().insert(e);
        Ok(())
    }

    fn delete_min(&mut self) -> PopResult {
        let mut heap = self.queue.heap.lock().unwrap();
        match heap.delete_min() {
            PopResult::Empty => PopResult::Empty,
            PopResult::Item(first) => match heap.delete_min() {
                PopResult::Empty => PopResult::Item(first),
                PopResult::Item(second) => {
                    heap.insert(first);
                    PopResult::Item(second)
                }
            },
        }
    }
}
