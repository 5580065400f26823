//! Sequential binary heaps: the generic [`MinHeap`] and the [`SeqHeap`]
//! oracle used as the reference for every queue variant.

use crate::{Entry, PopResult};

/// Array-backed binary min-heap over any ordered element type.
///
/// Invariant: for every index `i > 0`, `data[parent(i)] <= data[i]`.
#[derive(Debug, Clone, Default)]
pub struct MinHeap<T: Ord> {
    data: Vec<T>,
}

impl<T: Ord> MinHeap<T> {
    pub fn new() -> Self {
        MinHeap { data: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, value: T) {
        self.data.push(value);
        self.sift_up(self.data.len() - 1);
    }

    pub fn peek(&self) -> Option<&T> {
        self.data.first()
    }

    pub fn pop(&mut self) -> Option<T> {
        if self.data.is_empty() {
            return None;
        }
        let last = self.data.len() - 1;
        self.data.swap(0, last);
        let out = self.data.pop();
        if !self.data.is_empty() {
            self.sift_down(0);
        }
        out
    }

    /// Verifies the heap-order invariant; used by tests.
    pub fn check_heap_order(&self) -> bool {
        (1..self.data.len()).all(|i| self.data[(i - 1) / 2] <= self.data[i])
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.data[parent] <= self.data[i] {
                break;
            }
            self.data.swap(parent, i);
            i = parent;
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.data.len();
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let smallest = if right < n && self.data[right] < self.data[left] {
                right
            } else {
                left
            };
            if self.data[i] <= self.data[smallest] {
                break;
            }
            self.data.swap(i, smallest);
            i = smallest;
        }
    }
}

/// An entry plus the insertion sequence number that breaks ties among
/// equal keys. Ordering is lexicographic on `(key, seq)`, which gives
/// the oracle fully deterministic sequential behavior.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
struct Slot {
    key: u32,
    seq: u64,
    payload: u64,
}

/// Sequential binary-heap priority queue; the test oracle for every
/// concurrent variant.
#[derive(Debug, Clone, Default)]
pub struct SeqHeap {
    heap: MinHeap<Slot>,
    next_seq: u64,
}

impl SeqHeap {
    pub fn new() -> Self {
        SeqHeap {
            heap: MinHeap::new(),
            next_seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn insert(&mut self, e: Entry) {
        self.next_seq += 1;
        self.heap.push(Slot {
            key: e.key,
            seq: self.next_seq,
            payload: e.payload,
        });
    }

    pub fn peek_key(&self) -> Option<u32> {
        self.heap.peek().map(|s| s.key)
    }

    pub fn delete_min(&mut self) -> PopResult {
        match self.heap.pop() {
            Some(s) => PopResult::Item(Entry {
                key: s.key,
                payload: s.payload,
            }),
            None => PopResult::Empty,
        }
    }

    /// Removes every entry in nondecreasing key order, leaving the heap
    /// empty.
    pub fn oracle_drain(&mut self) -> Vec<Entry> {
        let mut out = Vec::with_capacity(self.len());
        while let PopResult::Item(e) = self.delete_min() {
            out.push(e);
        }
        out
    }

    /// Exposes the heap-order invariant check for tests.
    pub fn check_heap_order(&self) -> bool {
        self.heap.check_heap_order()
    }
}
