//! Skip-list priority queue with per-node logical-deletion flags and
//! insertion timestamps.
//!
//! `delete_min` walks the bottom level from the head and claims the
//! first node whose `deleted` flag it can flip; physical deletion
//! (mark + unlink) follows as a second step. Without further care this
//! is only quiescently consistent: a slow walker can pass the point
//! where a small key is later inserted and end up returning a larger
//! key inserted after it started. Timestamps restore linearizability:
//! each node is stamped from a logical clock once fully inserted, and a
//! walk ignores every node stamped after the walk began (or not yet
//! stamped at all).
//!
//! The timestamp filter can be disabled at construction to reproduce
//! the quiescently-consistent-only behavior in checker tests.

use std::sync::atomic::Ordering::{Acquire, Relaxed, Release, SeqCst};
use std::sync::atomic::{AtomicBool, AtomicU64};

use pq_core::yieldpoint::yield_point;
use pq_core::{
    ConcurrentPriorityQueue, CounterSnapshot, Entry, InsertError, OpCounters, PopResult,
    QueueHandle,
};
use rand::rngs::SmallRng;
use rand::SeedableRng;
use reclaim_epoch::{LocalHandle, ReclaimMode};
use skiplist_lockfree::{generate_level, SkipList};

/// Per-node state: the logical-deletion flag and the insertion
/// timestamp (zero until the insert fully completes).
#[derive(Debug, Default)]
pub struct SlExt {
    deleted: AtomicBool,
    timestamp: AtomicU64,
}

impl SlExt {
    pub fn is_deleted(&self) -> bool {
        self.deleted.load(Acquire)
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp.load(Acquire)
    }
}

pub struct ShavitLotanQueue {
    list: SkipList<SlExt>,
    clock: AtomicU64,
    timestamps_enabled: bool,
    counters: OpCounters,
}

impl ShavitLotanQueue {
    pub fn new(max_threads: usize) -> Self {
        Self::with_options(max_threads, true, ReclaimMode::Free)
    }

    /// `timestamps_enabled = false` reproduces the variant whose walks
    /// may return keys inserted after the walk began.
    pub fn with_options(max_threads: usize, timestamps_enabled: bool, mode: ReclaimMode) -> Self {
        ShavitLotanQueue {
            list: SkipList::with_mode(max_threads, mode),
            clock: AtomicU64::new(0),
            timestamps_enabled,
            counters: OpCounters::new(),
        }
    }

    pub fn list(&self) -> &SkipList<SlExt> {
        &self.list
    }

    fn insert_entry(&self, local: &LocalHandle<'_>, rng: &mut SmallRng, e: Entry) {
        yield_point("sl.ins.start");
        let guard = local.pin();
        let level = generate_level(rng);
        let node = self
            .list
            .insert_at_level(&guard, e, level, SlExt::default());
        let stamp = self.clock.fetch_add(1, SeqCst) + 1;
        unsafe { (*node).ext() }.timestamp.store(stamp, Release);
        yield_point("sl.ins.done");
    }

    fn pop_min(&self, local: &LocalHandle<'_>) -> PopResult {
        let guard = local.pin();
        let start_time = self.clock.load(SeqCst);
        yield_point("sl.pop.start");
        // Walk by position and re-read each successor on arrival, so a
        // paused walker observes links created while it slept.
        let mut pos = self.list.head();
        loop {
            yield_point("sl.pop.visit");
            let cur = unsafe { (*pos).succ(0) }.load().0;
            if cur.is_null() {
                // Reached the tail with no eligible node anywhere
                // (skipped nodes included): the queue is empty for us.
                // Alternative semantics would retry while nodes newer
                // than `start_time` exist.
                return PopResult::Empty;
            }
            let node = unsafe { &*cur };
            node.assert_live();
            let (_, marked) = unsafe { node.succ(0) }.load();
            if marked || node.ext().deleted.load(Acquire) {
                pos = cur;
                continue;
            }
            if self.timestamps_enabled {
                let stamp = node.ext().timestamp.load(Acquire);
                if stamp == 0 || stamp > start_time {
                    // Not fully inserted when this walk began.
                    pos = cur;
                    continue;
                }
            }
            if node
                .ext()
                .deleted
                .compare_exchange(false, true, SeqCst, Relaxed)
                .is_ok()
            {
                yield_point("sl.pop.claimed");
                unsafe {
                    self.list.mark_delete(cur);
                    self.list.unlink(&guard, cur);
                }
                return PopResult::Item(node.entry());
            }
            self.counters.record_cas_failure();
            pos = cur;
        }
    }
}

impl ConcurrentPriorityQueue for ShavitLotanQueue {
    fn register(&self) -> Box<dyn QueueHandle + '_> {
        Box::new(SlHandle {
            queue: self,
            local: self.list.register(),
            rng: SmallRng::from_os_rng(),
        })
    }

    fn counters(&self) -> CounterSnapshot {
        let mine = self.counters.snapshot();
        let list = self.list.counters.snapshot();
        CounterSnapshot {
            cas_failures: mine.cas_failures + list.cas_failures,
            restructures: 0,
            resprays: 0,
        }
    }
}

struct SlHandle<'a> {
    queue: &'a ShavitLotanQueue,
    local: LocalHandle<'a>,
    rng: SmallRng,
}

impl QueueHandle for SlHandle<'_> {
    fn insert(&mut self, e: Entry) -> Result<(), InsertError> {
        self.queue.insert_entry(&self.local, &mut self.rng, e);
        Ok(())
    }

    fn delete_min(&mut self) -> PopResult {
        self.queue.pop_min(&self.local)
    }
}
