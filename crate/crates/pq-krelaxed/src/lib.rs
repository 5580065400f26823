//! Hybrid k-relaxed priority queue: thread-local sequential heaps plus
//! a shared publication list.
//!
//! Each thread inserts into its own list and heap and publishes the
//! accumulated batch to the global list after every k-th insert; on
//! publication (and on every pop) it also pulls all batches it has not
//! seen into its heap. `delete_min` pops the local heap, discarding
//! items whose `taken` flag another thread already won; an empty heap
//! triggers spying, a read-only copy of another thread's unpublished
//! items. Together this bounds how many better items a thread can miss
//! to the k unpublished items of each of the other P-1 threads, within
//! the advertised k*P bound.
//!
//! Items are shared via reference counting: the global list only ever
//! grows during a run, so no unlink/reclaim cycle exists to manage.

use std::sync::atomic::Ordering::{AcqRel, Acquire, Relaxed};
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicU64};
use std::sync::{Arc, Mutex, RwLock};

use pq_core::{
    ConcurrentPriorityQueue, Entry, InsertError, MinHeap, PopResult, QueueHandle,
};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

/// Default relaxation constant.
pub const DEFAULT_K: usize = 64;

/// A published or publishable item; `taken` flips exactly once, and the
/// winner returns the item.
#[derive(Debug)]
pub struct SharedItem {
    key: u32,
    seq: u64,
    payload: u64,
    taken: AtomicBool,
}

impl SharedItem {
    fn entry(&self) -> Entry {
        Entry::new(self.key, self.payload)
    }

    pub fn is_taken(&self) -> bool {
        self.taken.load(Acquire)
    }
}

/// Heap reference ordered by `(key, seq)`.
struct HeapRef(Arc<SharedItem>);

impl PartialEq for HeapRef {
    fn eq(&self, other: &Self) -> bool {
        (self.0.key, self.0.seq) == (other.0.key, other.0.seq)
    }
}
impl Eq for HeapRef {}
impl PartialOrd for HeapRef {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapRef {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.0.key, self.0.seq).cmp(&(other.0.key, other.0.seq))
    }
}

/// One published batch; appended once, then immutable.
struct BatchNode {
    items: Vec<Arc<SharedItem>>,
    publisher: usize,
    next: AtomicPtr<BatchNode>,
}

/// Append-only list of published batches with a lock-free tail append.
struct GlobalList {
    head: *mut BatchNode,
    tail: AtomicPtr<BatchNode>,
}

unsafe impl Send for GlobalList {}
unsafe impl Sync for GlobalList {}

impl GlobalList {
    fn new() -> Self {
        let sentinel = Box::into_raw(Box::new(BatchNode {
            items: Vec::new(),
            publisher: usize::MAX,
            next: AtomicPtr::new(std::ptr::null_mut()),
        }));
        GlobalList {
            head: sentinel,
            tail: AtomicPtr::new(sentinel),
        }
    }

    /// Lock-free append: one compare-and-swap on the tail's next link,
    /// with helping for a lagging tail pointer.
    fn append(&self, node: Box<BatchNode>) {
        let node = Box::into_raw(node);
        loop {
            let tail = self.tail.load(Acquire);
            let next = unsafe { (*tail).next.load(Acquire) };
            if !next.is_null() {
                let _ = self
                    .tail
                    .compare_exchange(tail, next, AcqRel, Relaxed);
                continue;
            }
            if unsafe { (*tail).next.compare_exchange(
                std::ptr::null_mut(),
                node,
                AcqRel,
                Relaxed,
            ) }
            .is_ok()
            {
                let _ = self.tail.compare_exchange(tail, node, AcqRel, Relaxed);
                return;
            }
        }
    }
}

impl Drop for GlobalList {
    fn drop(&mut self) {
        let mut cur = self.head;
        while !cur.is_null() {
            let next = unsafe { (*cur).next.load(Relaxed) };
            drop(unsafe { Box::from_raw(cur) });
            cur = next;
        }
    }
}

/// The slice of per-thread state spies may read.
struct ThreadShared {
    /// Locally created items not yet published.
    local_list: Mutex<Vec<Arc<SharedItem>>>,
}

pub struct KRelaxedQueue {
    global: GlobalList,
    threads: RwLock<Vec<Arc<ThreadShared>>>,
    k: usize,
    next_seq: AtomicU64,
}

impl KRelaxedQueue {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1);
        KRelaxedQueue {
            global: GlobalList::new(),
            threads: RwLock::new(Vec::new()),
            k,
            next_seq: AtomicU64::new(0),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of published batches; test instrumentation.
    pub fn published_batches(&self) -> usize {
        let mut n = 0;
        let mut cur = unsafe { (*self.global.head).next.load(Acquire) };
        while !cur.is_null() {
            n += 1;
            cur = unsafe { (*cur).next.load(Acquire) };
        }
        n
    }

    /// Every untaken item reachable through the global list; quiescent
    /// test instrumentation (unpublished items are not included).
    pub fn published_untaken(&self) -> Vec<Entry> {
        let mut out = Vec::new();
        let mut cur = unsafe { (*self.global.head).next.load(Acquire) };
        while !cur.is_null() {
            for item in unsafe { &(*cur).items } {
                if !item.is_taken() {
                    out.push(item.entry());
                }
            }
            cur = unsafe { (*cur).next.load(Acquire) };
        }
        out
    }
}

impl ConcurrentPriorityQueue for KRelaxedQueue {
    fn register(&self) -> Box<dyn QueueHandle + '_> {
        let shared = Arc::new(ThreadShared {
            local_list: Mutex::new(Vec::new()),
        });
        let mut threads = self.threads.write().unwrap();
        let index = threads.len();
        threads.push(Arc::clone(&shared));
        drop(threads);
        Box::new(KRelaxedHandle {
            queue: self,
            shared,
            index,
            heap: MinHeap::new(),
            remaining_k: self.k,
            cursor: self.global.head,
            rng: SmallRng::from_os_rng(),
        })
    }
}

struct KRelaxedHandle<'a> {
    queue: &'a KRelaxedQueue,
    shared: Arc<ThreadShared>,
    index: usize,
    heap: MinHeap<HeapRef>,
    remaining_k: usize,
    /// Last global-list node whose batch we have consumed.
    cursor: *mut BatchNode,
    rng: SmallRng,
}

// The raw cursor points into the append-only list, which outlives every
// handle.
unsafe impl Send for KRelaxedHandle<'_> {}

impl KRelaxedHandle<'_> {
    /// Pulls every batch published since the last sync into the local
    /// heap. Our own batches are skipped: their items entered the heap
    /// at insertion.
    fn sync(&mut self) {
        loop {
            let next = unsafe { (*self.cursor).next.load(Acquire) };
            if next.is_null() {
                return;
            }
            let node = unsafe { &*next };
            if node.publisher != self.index {
                for item in &node.items {
                    if !item.is_taken() {
                        self.heap.push(HeapRef(Arc::clone(item)));
                    }
                }
            }
            self.cursor = next;
        }
    }

    /// Appends the unpublished local batch to the global list, syncs,
    /// and resets the insertion budget.
    fn publish_and_sync(&mut self) {
        let batch: Vec<Arc<SharedItem>> =
            std::mem::take(&mut *self.shared.local_list.lock().unwrap());
        if !batch.is_empty() {
            self.queue.global.append(Box::new(BatchNode {
                items: batch,
                publisher: self.index,
                next: AtomicPtr::new(std::ptr::null_mut()),
            }));
        }
        self.sync();
        self.remaining_k = self.queue.k;
    }

    /// Pops the local heap until an untaken item is won.
    fn try_pop_local(&mut self) -> Option<Entry> {
        while let Some(HeapRef(item)) = self.heap.pop() {
            if item
                .taken
                .compare_exchange(false, true, AcqRel, Relaxed)
                .is_ok()
            {
                return Some(item.entry());
            }
        }
        None
    }

    /// Read-only copy of a victim's unpublished items into our heap;
    /// the victim's list is left untouched.
    fn spy(&mut self, victim: &ThreadShared) -> usize {
        let list = victim.local_list.lock().unwrap();
        let mut copied = 0;
        for item in list.iter() {
            if !item.is_taken() {
                self.heap.push(HeapRef(Arc::clone(item)));
                copied += 1;
            }
        }
        copied
    }

    fn spy_random(&mut self) -> usize {
        let victims: Vec<Arc<ThreadShared>> = {
            let threads = self.queue.threads.read().unwrap();
            threads
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != self.index)
                .map(|(_, t)| Arc::clone(t))
                .collect()
        };
        if victims.is_empty() {
            return 0;
        }
        let pick = self.rng.random_range(0..victims.len());
        self.spy(&victims[pick])
    }

    fn spy_all(&mut self) -> usize {
        let victims: Vec<Arc<ThreadShared>> = {
            let threads = self.queue.threads.read().unwrap();
            threads
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != self.index)
                .map(|(_, t)| Arc::clone(t))
                .collect()
        };
        victims.iter().map(|v| self.spy(v)).sum()
    }
}

impl QueueHandle for KRelaxedHandle<'_> {
    fn insert(&mut self, e: Entry) -> Result<(), InsertError> {
        let seq = self.queue.next_seq.fetch_add(1, Relaxed) + 1;
        let item = Arc::new(SharedItem {
            key: e.key,
            seq,
            payload: e.payload,
            taken: AtomicBool::new(false),
        });
        self.shared.local_list.lock().unwrap().push(Arc::clone(&item));
        self.heap.push(HeapRef(item));
        self.remaining_k -= 1;
        if self.remaining_k == 0 {
            self.publish_and_sync();
        }
        Ok(())
    }

    fn delete_min(&mut self) -> PopResult {
        // Syncing on every pop keeps the miss bound at the unpublished
        // items of other threads, at the cost of one pointer read when
        // nothing new was published.
        self.sync();
        if let Some(e) = self.try_pop_local() {
            return PopResult::Item(e);
        }
        // Empty local heap: one random spy attempt first.
        if self.spy_random() > 0 {
            if let Some(e) = self.try_pop_local() {
                return PopResult::Item(e);
            }
        }
        // Empty candidacy: a final sync plus one full spy round.
        self.sync();
        self.spy_all();
        match self.try_pop_local() {
            Some(e) => PopResult::Item(e),
            None => PopResult::Empty,
        }
    }
}

impl Drop for KRelaxedHandle<'_> {
    fn drop(&mut self) {
        // Leave unpublished items visible to the surviving threads.
        self.publish_and_sync();
    }
}
