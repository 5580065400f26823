//! The lock-free skip list.
//!
//! Deletion is two-phase: [`SkipList::mark_delete`] wins the logical
//! delete by setting the mark bit on the node's own successor words,
//! and traversals cooperatively excise marked nodes they encounter
//! ([`SkipList::search`] does the physical unlinking). A node is retired
//! to the epoch collector by whichever thread removes it from level 0;
//! because every search pass excises top-down and the lists stay
//! `(key, seq)`-ordered, a node leaves all upper levels before it can
//! leave level 0.
//!
//! The bottom list is sorted strictly ascending by `(key, seq)` among
//! unmarked nodes; equal keys order by insertion sequence number.

use std::sync::atomic::{AtomicU64, Ordering::Relaxed};

use pq_core::{Entry, OpCounters};
use reclaim_epoch::{Collector, Guard, LocalHandle, ReclaimMode};

use crate::level::TOWER_SLOTS;
use crate::node::Node;

/// Per-level predecessor/successor frontier returned by a search.
pub struct SearchResult<E> {
    pub preds: [*mut Node<E>; TOWER_SLOTS],
    pub succs: [*mut Node<E>; TOWER_SLOTS],
}

pub struct SkipList<E> {
    head: *mut Node<E>,
    collector: Collector,
    next_seq: AtomicU64,
    pub counters: OpCounters,
}

unsafe impl<E: Send> Send for SkipList<E> {}
unsafe impl<E: Send + Sync> Sync for SkipList<E> {}

impl<E: Default> SkipList<E> {
    pub fn new(max_threads: usize) -> Self {
        Self::with_mode(max_threads, ReclaimMode::Free)
    }

    pub fn with_mode(max_threads: usize, mode: ReclaimMode) -> Self {
        SkipList {
            head: Node::alloc(0, 0, 0, TOWER_SLOTS - 1, E::default()),
            collector: Collector::with_mode(max_threads, mode),
            next_seq: AtomicU64::new(0),
            counters: OpCounters::new(),
        }
    }
}

impl<E> SkipList<E> {
    /// Head sentinel; conceptually holds key negative infinity. A null
    /// successor plays the tail sentinel (key positive infinity).
    pub fn head(&self) -> *mut Node<E> {
        self.head
    }

    pub fn collector(&self) -> &Collector {
        &self.collector
    }

    /// Registers the calling thread with the list's epoch collector.
    pub fn register(&self) -> LocalHandle<'_> {
        self.collector.register()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq.fetch_add(1, Relaxed) + 1
    }

    /// Locates, per level, the last node ordered before `(key, seq)` and
    /// the first at or after it, considering only unmarked nodes. Marked
    /// nodes encountered on the way are physically unlinked (helping),
    /// and a node excised from level 0 is retired.
    pub fn search(&self, guard: &Guard<'_, '_>, key: u32, seq: u64) -> SearchResult<E> {
        'retry: loop {
            let mut preds = [self.head; TOWER_SLOTS];
            let mut succs = [std::ptr::null_mut(); TOWER_SLOTS];
            let mut pred = self.head;
            for lvl in (0..TOWER_SLOTS).rev() {
                let (mut cur, _) = unsafe { (*pred).succ(lvl) }.load();
                loop {
                    if cur.is_null() {
                        break;
                    }
                    let cur_ref = unsafe { &*cur };
                    cur_ref.assert_live();
                    let (next, cur_marked) = unsafe { cur_ref.succ(lvl) }.load();
                    if cur_marked {
                        if unsafe { (*pred).succ(lvl) }
                            .compare_exchange((cur, false), (next, false))
                            .is_err()
                        {
                            self.counters.record_cas_failure();
                            continue 'retry;
                        }
                        if lvl == 0 {
                            unsafe { guard.retire(Node::deferred(cur)) };
                        }
                        cur = next;
                        continue;
                    }
                    if cur_ref.rank() < (key, seq) {
                        pred = cur;
                        cur = next;
                        continue;
                    }
                    break;
                }
                preds[lvl] = pred;
                succs[lvl] = cur;
            }
            return SearchResult { preds, succs };
        }
    }

    /// Inserts an entry as a node of the given tower level, returning
    /// the node. The node is in the list once its bottom link lands;
    /// upper levels are linked afterwards and abandoned on conflict.
    pub fn insert_at_level(
        &self,
        guard: &Guard<'_, '_>,
        entry: Entry,
        level: usize,
        ext: E,
    ) -> *mut Node<E> {
        let seq = self.next_seq();
        let node = Node::alloc(entry.key, seq, entry.payload, level, ext);
        loop {
            let found = self.search(guard, entry.key, seq);
            for l in 0..=level {
                unsafe { (*node).succ(l) }.store(found.succs[l], false);
            }
            if unsafe { (*found.preds[0]).succ(0) }
                .compare_exchange((found.succs[0], false), (node, false))
                .is_err()
            {
                self.counters.record_cas_failure();
                continue;
            }
            for l in 1..=level {
                // A concurrent delete may have marked us already; the
                // node is correct without its upper links.
                let (_, marked) = unsafe { (*node).succ(0) }.load();
                if marked {
                    return node;
                }
                if unsafe { (*found.preds[l]).succ(l) }
                    .compare_exchange((found.succs[l], false), (node, false))
                    .is_err()
                {
                    self.counters.record_cas_failure();
                    return node;
                }
            }
            return node;
        }
    }

    /// Logical deletion: wins the 0 -> 1 transition of the bottom-level
    /// mark for exactly one caller. Marks the whole tower top-down.
    ///
    /// # Safety
    /// `node` must be protected by the caller's guard.
    pub unsafe fn mark_delete(&self, node: *mut Node<E>) -> bool {
        let node = unsafe { &*node };
        node.assert_live();
        node.mark_tower()
    }

    /// Physical deletion: unlinks a marked node from every level and
    /// retires it (here or in a helping traversal).
    ///
    /// # Safety
    /// `node` must be marked and protected by the caller's guard.
    pub unsafe fn unlink(&self, guard: &Guard<'_, '_>, node: *mut Node<E>) {
        let (key, seq) = unsafe { (*node).rank() };
        let found = self.search(guard, key, seq);
        debug_assert!(found.succs[0] != node, "marked node survived unlink");
    }

    /// Entries of unmarked bottom-level nodes, in list order.
    pub fn collect_entries(&self, _guard: &Guard<'_, '_>) -> Vec<Entry> {
        let mut out = Vec::new();
        let mut cur = unsafe { (*self.head).succ(0) }.load().0;
        while !cur.is_null() {
            let node = unsafe { &*cur };
            node.assert_live();
            let (next, marked) = unsafe { node.succ(0) }.load();
            if !marked {
                out.push(node.entry());
            }
            cur = next;
        }
        out
    }

    /// Zero-based position of `node` in the raw bottom list (marked
    /// nodes included). Instrumentation for the spray tests.
    pub fn bottom_position(&self, _guard: &Guard<'_, '_>, node: *mut Node<E>) -> Option<usize> {
        let mut cur = unsafe { (*self.head).succ(0) }.load().0;
        let mut idx = 0;
        while !cur.is_null() {
            if cur == node {
                return Some(idx);
            }
            cur = unsafe { (*cur).succ(0) }.load().0;
            idx += 1;
        }
        None
    }

    /// Checks the level-subset property and per-level sortedness among
    /// unmarked nodes. Quiescent use only (tests).
    pub fn check_level_structure(&self) -> bool {
        let collect = |lvl: usize| {
            let mut nodes = Vec::new();
            let mut cur = unsafe { (*self.head).succ(lvl) }.load().0;
            while !cur.is_null() {
                let node = unsafe { &*cur };
                if !unsafe { node.succ(0) }.load().1 {
                    nodes.push((cur, node.rank()));
                }
                cur = unsafe { node.succ(lvl) }.load().0;
            }
            nodes
        };
        let bottom = collect(0);
        if bottom.windows(2).any(|w| w[0].1 >= w[1].1) {
            return false;
        }
        let mut below: std::collections::HashSet<*mut Node<E>> =
            bottom.iter().map(|&(p, _)| p).collect();
        for lvl in 1..TOWER_SLOTS {
            let nodes = collect(lvl);
            if nodes.windows(2).any(|w| w[0].1 >= w[1].1) {
                return false;
            }
            if !nodes.iter().all(|(p, _)| below.contains(p)) {
                return false;
            }
            below = nodes.iter().map(|&(p, _)| p).collect();
        }
        true
    }
}

impl<E> Drop for SkipList<E> {
    fn drop(&mut self) {
        // Nodes still linked at level 0 belong to the list; everything
        // else was retired and is freed by the collector's drop.
        let mut cur = self.head;
        while !cur.is_null() {
            let next = unsafe { (*cur).succ(0) }.load().0;
            unsafe { Node::finalize(cur) };
            cur = next;
        }
    }
}
