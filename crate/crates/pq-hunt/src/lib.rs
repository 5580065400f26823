//! Fixed-capacity concurrent binary heap with per-node locks.
//!
//! The heap spreads contention three ways: every slot has its own lock,
//! consecutive insertions are assigned bottom-layer slots in
//! bit-reversed order so their root paths diverge, and insertions sift
//! bottom-up while deletions sift top-down. One global lock still
//! guards the size counter; every operation takes it briefly to claim
//! or release a position.
//!
//! Slot/tag protocol: an inserted item is tagged in-transit while its
//! owner sifts it up; a sifting-down deletion treats in-transit slots
//! as holding key infinity and never moves them, while the owner
//! re-validates its position under lock after each step and chases the
//! item upward if a deletion relocated it (the only relocation is
//! last-slot to root). An in-transit item found at the root outranked
//! every item on its path, so deletions may consume it. This tag
//! protocol is a reconstruction in the spirit of the original design,
//! which is not fully specified in the literature we follow.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering::Relaxed};
use std::sync::{Mutex, MutexGuard};

use pq_core::{ConcurrentPriorityQueue, Entry, InsertError, PopResult, QueueHandle};

/// Heap item ordered by `(key, seq)`; the sequence number makes ties
/// deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Item {
    key: u32,
    seq: u64,
    payload: u64,
}

impl Item {
    fn entry(&self) -> Entry {
        Entry::new(self.key, self.payload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Empty,
    Available(Item),
    InTransit(Item, u32),
}

/// Lock-acquisition counters backing the root-bottleneck observation.
#[derive(Debug, Default)]
pub struct HeapStats {
    pub root_locks_by_delete: AtomicU64,
    pub deletes_nonempty: AtomicU64,
}

/// Default capacity; smaller heaps risk quasi-deadlock under high
/// concurrency, so the benchmark default is deliberately large.
pub const DEFAULT_CAPACITY: usize = 1 << 18;

pub struct HuntHeap {
    /// 1-based slot array; index 0 is unused. Sized to a full bottom
    /// layer so bit-reversed slots stay in range.
    slots: Vec<Mutex<Slot>>,
    capacity: usize,
    size: Mutex<usize>,
    next_seq: AtomicU64,
    next_owner: AtomicU32,
    pub stats: HeapStats,
}

/// Bottom-layer slot for the `pos`-th element (1-based): the offset
/// within the layer is bit-reversed, so consecutive insertions take
/// disjoint paths toward the root.
pub fn slot_for_position(pos: usize) -> usize {
    debug_assert!(pos >= 1);
    let layer = usize::BITS - 1 - pos.leading_zeros(); // floor(log2 pos)
    if layer == 0 {
        return 1;
    }
    let offset = pos - (1 << layer);
    let reversed = offset.reverse_bits() >> (usize::BITS - layer);
    (1 << layer) + reversed
}

impl HuntHeap {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        // Round the slot array up to a full bottom layer.
        let top_layer = usize::BITS - 1 - capacity.leading_zeros();
        let slots_len = (1usize << (top_layer + 1)) - 1;
        HuntHeap {
            slots: (0..=slots_len).map(|_| Mutex::new(Slot::Empty)).collect(),
            capacity,
            size: Mutex::new(0),
            next_seq: AtomicU64::new(0),
            next_owner: AtomicU32::new(1),
            stats: HeapStats::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        *self.size.lock().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The slot the next insertion will claim, or an error at capacity.
    /// Callers hold the size lock; exposed as a pure function of size.
    pub fn next_insert_slot(size: usize, capacity: usize) -> Result<usize, InsertError> {
        if size >= capacity {
            Err(InsertError::CapacityExceeded)
        } else {
            Ok(slot_for_position(size + 1))
        }
    }

    fn insert_item(&self, e: Entry, owner: u32) -> Result<(), InsertError> {
        // Claim a position under the size lock, lock the claimed slot,
        // then release the size lock: it is held only to claim.
        let mut size = self.size.lock().unwrap();
        let idx = Self::next_insert_slot(*size, self.capacity)?;
        *size += 1;
        let seq = self.next_seq.fetch_add(1, Relaxed) + 1;
        let mut slot = self.slots[idx].lock().unwrap();
        drop(size);
        debug_assert_eq!(*slot, Slot::Empty, "claimed slot must be vacant");
        let item = Item {
            key: e.key,
            seq,
            payload: e.payload,
        };
        *slot = Slot::InTransit(item, owner);
        drop(slot);
        self.sift_up(idx, owner);
        Ok(())
    }

    /// Moves the owner's in-transit item toward the root until its
    /// parent is no larger, re-validating under locks at every step.
    fn sift_up(&self, mut i: usize, owner: u32) {
        while i > 1 {
            let parent = i / 2;
            let mut pguard = self.slots[parent].lock().unwrap();
            let mut iguard = self.slots[i].lock().unwrap();
            match (*pguard, *iguard) {
                (Slot::Available(p), Slot::InTransit(x, o)) if o == owner => {
                    if x < p {
                        *pguard = Slot::InTransit(x, owner);
                        *iguard = Slot::Available(p);
                        drop(iguard);
                        drop(pguard);
                        i = parent;
                    } else {
                        *iguard = Slot::Available(x);
                        return;
                    }
                }
                (Slot::InTransit(..), Slot::InTransit(_, o)) if o == owner => {
                    // Parent still migrating; let its owner resolve.
                    drop(iguard);
                    drop(pguard);
                    std::thread::yield_now();
                }
                (Slot::Empty, Slot::InTransit(_, o)) if o == owner => {
                    // Occupied positions have occupied ancestors; retry.
                    drop(iguard);
                    drop(pguard);
                    std::thread::yield_now();
                }
                _ => {
                    // Slot no longer ours: a deletion relocated the item
                    // (relocations only go upward). Chase it.
                    drop(iguard);
                    drop(pguard);
                    i = parent;
                }
            }
        }
        let mut root = self.slots[1].lock().unwrap();
        if let Slot::InTransit(x, o) = *root {
            if o == owner {
                *root = Slot::Available(x);
            }
        }
    }

    fn delete_item(&self) -> PopResult {
        // Release a position under the size lock and take whatever item
        // occupies its slot.
        let mut size = self.size.lock().unwrap();
        if *size == 0 {
            return PopResult::Empty;
        }
        let last_pos = *size;
        *size -= 1;
        let bottom = slot_for_position(last_pos);
        let mut bguard = self.slots[bottom].lock().unwrap();
        drop(size);
        let carried = match *bguard {
            Slot::Available(x) | Slot::InTransit(x, _) => x,
            Slot::Empty => unreachable!("occupied position {last_pos} had a vacant slot"),
        };
        *bguard = Slot::Empty;
        drop(bguard);
        self.stats.deletes_nonempty.fetch_add(1, Relaxed);

        // The released position was the root: the carried item is the
        // whole heap.
        if last_pos == 1 {
            return PopResult::Item(carried.entry());
        }

        let mut rguard = self.slots[1].lock().unwrap();
        self.stats.root_locks_by_delete.fetch_add(1, Relaxed);
        let result = match *rguard {
            // A racing deletion drained the rest of the heap; the
            // carried item is all that is left.
            Slot::Empty => {
                return PopResult::Item(carried.entry());
            }
            // An in-transit item only reaches the root by outranking
            // everything on its path, so it is a minimum: consume it.
            Slot::Available(r) | Slot::InTransit(r, _) => r,
        };
        *rguard = Slot::Available(carried);
        self.sift_down(rguard);
        PopResult::Item(result.entry())
    }

    /// Hand-over-hand top-down restore starting from the locked root.
    /// In-transit and vacant children compare as key infinity.
    fn sift_down<'a>(&'a self, mut guard: MutexGuard<'a, Slot>) {
        let mut i = 1;
        loop {
            let my_item = match *guard {
                Slot::Available(x) => x,
                // Nothing rewrites a slot while we hold its lock.
                _ => unreachable!("sift-down lost its item"),
            };
            let left = 2 * i;
            if left >= self.slots.len() {
                return;
            }
            let lguard = self.slots[left].lock().unwrap();
            let right = left + 1;
            let rguard = if right < self.slots.len() {
                Some(self.slots[right].lock().unwrap())
            } else {
                None
            };
            let item_of = |s: &Slot| match s {
                Slot::Available(x) => Some(*x),
                _ => None,
            };
            let lchild = item_of(&lguard);
            let rchild = rguard.as_deref().and_then(item_of);
            let (child_idx, child_item, mut child_guard) = match (lchild, rchild) {
                (Some(l), Some(r)) if r < l => (right, r, rguard.unwrap()),
                (Some(l), _) => (left, l, lguard),
                (None, Some(r)) => (right, r, rguard.unwrap()),
                (None, None) => return,
            };
            if my_item <= child_item {
                return;
            }
            *guard = Slot::Available(child_item);
            *child_guard = Slot::Available(my_item);
            drop(guard);
            guard = child_guard;
            i = child_idx;
        }
    }

    /// Quiescent check: every available slot is no smaller than its
    /// available parent, and no available slot hangs below a vacant one.
    pub fn check_heap_order(&self) -> bool {
        let snapshot: Vec<Slot> = self.slots.iter().map(|s| *s.lock().unwrap()).collect();
        (2..snapshot.len()).all(|i| match (snapshot[i / 2], snapshot[i]) {
            (Slot::Available(p), Slot::Available(c)) => p <= c,
            (Slot::Empty, Slot::Available(_)) => false,
            _ => true,
        })
    }
}

impl ConcurrentPriorityQueue for HuntHeap {
    fn register(&self) -> Box<dyn QueueHandle + '_> {
        let owner = self.next_owner.fetch_add(1, Relaxed);
        Box::new(HuntHandle { heap: self, owner })
    }
}

struct HuntHandle<'a> {
    heap: &'a HuntHeap,
    owner: u32,
}

impl QueueHandle for HuntHandle<'_> {
    fn insert(&mut self, e: Entry) -> Result<(), InsertError> {
        self.heap.insert_item(e, self.owner)
    }

    fn delete_min(&mut self) -> PopResult {
        self.heap.delete_item()
    }
}
