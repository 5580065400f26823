//! Lock-free priority queue with the deletion flag held in the
//! predecessor's bottom-level successor word.
//!
//! A set flag on node `x`'s bottom word means "x's successor is
//! logically deleted". Most `delete_min` calls are a read sequence plus
//! one fetch-and-or: walk the flagged prefix, then fetch-or the first
//! unflagged word; whoever sees the flag bit previously unset owns that
//! word's successor. Because flags live in predecessors, insertions can
//! never link in front of a logically deleted node, so the deleted
//! nodes always form a contiguous prefix of the bottom list.
//!
//! Physical deletion is batched: once a walk traverses `bound_offset`
//! deleted nodes, it swings the head's bottom pointer to the last
//! deleted node with one compare-and-swap, updates the upper head
//! pointers, and retires the bypassed prefix. The head never moves past
//! a node whose `inserting` flag is still set.
//!
//! Reclamation safety rests on an ordering invariant: at every level,
//! deleted nodes precede live nodes. Claims take live nodes in bottom
//! order, so a node's predecessors are always deleted no later than the
//! node itself; and insertions refuse to link an upper level in front
//! of a node observed deleted (including the last deleted node, whose
//! deletion is only visible through its predecessor's flag, reported by
//! the bottom walk). Bypassed nodes therefore have no inbound links
//! from live nodes by the time they are retired.

use std::collections::HashSet;
use std::sync::atomic::Ordering::{Acquire, Relaxed, Release};
use std::sync::atomic::{AtomicBool, AtomicU64};

use pq_core::yieldpoint::yield_point;
use pq_core::{
    ConcurrentPriorityQueue, CounterSnapshot, Entry, InsertError, OpCounters, PopResult,
    QueueHandle,
};
use rand::rngs::SmallRng;
use rand::SeedableRng;
use reclaim_epoch::{Collector, Guard, LocalHandle, ReclaimMode};
use skiplist_lockfree::{generate_level, Node, TOWER_SLOTS};

/// Default deleted-prefix length that triggers physical restructuring.
pub const DEFAULT_BOUND_OFFSET: usize = 32;

/// Opt-in reachability sweep at every restructure (diagnostics).
fn validation_enabled() -> bool {
    static ENABLED: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    *ENABLED.get_or_init(|| std::env::var_os("PQ_LINDEN_VALIDATE").is_some())
}

/// Per-node state: set from before the bottom-level link until every
/// level is linked.
#[derive(Debug, Default)]
pub struct LindenExt {
    inserting: AtomicBool,
}

impl LindenExt {
    pub fn is_inserting(&self) -> bool {
        self.inserting.load(Acquire)
    }
}

type LNode = Node<LindenExt>;

struct Located {
    preds: [*mut LNode; TOWER_SLOTS],
    succs: [*mut LNode; TOWER_SLOTS],
    /// Last logically deleted node the bottom walk stepped through.
    /// Its own word is unflagged, so it is otherwise indistinguishable
    /// from a live node.
    last_deleted: *mut LNode,
}

pub struct LindenQueue {
    head: *mut LNode,
    collector: Collector,
    next_seq: AtomicU64,
    bound_offset: usize,
    counters: OpCounters,
}

unsafe impl Send for LindenQueue {}
unsafe impl Sync for LindenQueue {}

impl LindenQueue {
    pub fn new(max_threads: usize) -> Self {
        Self::with_options(max_threads, DEFAULT_BOUND_OFFSET, ReclaimMode::Free)
    }

    pub fn with_options(max_threads: usize, bound_offset: usize, mode: ReclaimMode) -> Self {
        assert!(bound_offset >= 1);
        LindenQueue {
            head: Node::alloc(0, 0, 0, TOWER_SLOTS - 1, LindenExt::default()),
            collector: Collector::with_mode(max_threads, mode),
            next_seq: AtomicU64::new(0),
            bound_offset,
            counters: OpCounters::new(),
        }
    }

    pub fn bound_offset(&self) -> usize {
        self.bound_offset
    }

    pub fn collector(&self) -> &Collector {
        &self.collector
    }

    pub fn register_reclaim(&self) -> LocalHandle<'_> {
        self.collector.register()
    }

    /// A node is interior to the deleted prefix iff its own bottom word
    /// is flagged (its successor is deleted and deletions form a
    /// prefix). This misses only the prefix's last node.
    #[inline]
    fn interior_deleted(node: &LNode) -> bool {
        unsafe { node.succ(0) }.load().1
    }

    fn locate_preds(&self, key: u32, seq: u64) -> Located {
        let mut preds = [self.head; TOWER_SLOTS];
        let mut succs = [std::ptr::null_mut(); TOWER_SLOTS];
        let mut last_deleted = std::ptr::null_mut();
        let mut pred = self.head;
        for lvl in (0..TOWER_SLOTS).rev() {
            // The recorded successor must be the node the walk actually
            // validated (dead or ordered below the probe means keep
            // walking): a re-read could observe a concurrently inserted
            // node below the probe, and linking in front of it would
            // break the order the restructure's reclamation relies on.
            let stop;
            loop {
                let (cur, edge_flag) = unsafe { (*pred).succ(lvl) }.load();
                if cur.is_null() {
                    stop = cur;
                    break;
                }
                let node = unsafe { &*cur };
                node.assert_live();
                let deleted = if lvl == 0 {
                    if edge_flag {
                        last_deleted = cur;
                        true
                    } else {
                        Self::interior_deleted(node)
                    }
                } else {
                    Self::interior_deleted(node)
                };
                if deleted || node.rank() < (key, seq) {
                    pred = cur;
                    continue;
                }
                stop = cur;
                break;
            }
            preds[lvl] = pred;
            succs[lvl] = stop;
        }
        Located {
            preds,
            succs,
            last_deleted,
        }
    }

    fn insert_entry(&self, local: &LocalHandle<'_>, rng: &mut SmallRng, e: Entry) {
        let guard = local.pin();
        let level = generate_level(rng);
        let seq = self.next_seq.fetch_add(1, Relaxed) + 1;
        let node = Node::alloc(
            e.key,
            seq,
            e.payload,
            level,
            LindenExt {
                inserting: AtomicBool::new(true),
            },
        );
        let mut found;
        loop {
            found = self.locate_preds(e.key, seq);
            for l in 0..=level {
                unsafe { (*node).succ(l) }.store(found.succs[l], false);
            }
            // A flag set on the predecessor's word since the walk means
            // its successor was deleted; linking would land in front of
            // a deleted node, so retry from scratch.
            if unsafe { (*found.preds[0]).succ(0) }
                .compare_exchange((found.succs[0], false), (node, false))
                .is_ok()
            {
                break;
            }
            self.counters.record_cas_failure();
        }
        yield_point("linden.ins.linked");
        for l in 1..=level {
            // Stop once we are deleted ourselves (our own word got
            // flagged), or if the successor candidate is deleted: an
            // upper link in front of a dead node would break the
            // dead-before-live ordering that restructure relies on.
            if unsafe { (*node).succ(0) }.load().1 {
                break;
            }
            let succ = found.succs[l];
            if !succ.is_null() {
                let succ_ref = unsafe { &*succ };
                succ_ref.assert_live();
                if succ == found.last_deleted || Self::interior_deleted(succ_ref) {
                    break;
                }
            }
            if unsafe { (*found.preds[l]).succ(l) }
                .compare_exchange((succ, false), (node, false))
                .is_err()
            {
                self.counters.record_cas_failure();
                break;
            }
        }
        unsafe { (*node).ext() }.inserting.store(false, Release);
        drop(guard);
    }

    fn pop_min(&self, local: &LocalHandle<'_>) -> PopResult {
        let guard = local.pin();
        let mut pos = self.head;
        let mut traversed = 0usize;
        loop {
            let (cur, edge_flag) = unsafe { (*pos).succ(0) }.load();
            if cur.is_null() {
                return PopResult::Empty;
            }
            unsafe { (*cur).assert_live() };
            if edge_flag {
                traversed += 1;
                pos = cur;
                continue;
            }
            // Candidate: claim pos's current successor with one
            // fetch-and-or on pos's word.
            let (claimed, was_flagged) = unsafe { (*pos).succ(0) }.fetch_or_mark();
            debug_assert!(!claimed.is_null(), "claim word reverted to tail");
            if was_flagged {
                // Lost the race; the successor is deleted, keep walking.
                self.counters.record_cas_failure();
                traversed += 1;
                pos = claimed;
                continue;
            }
            let node = unsafe { &*claimed };
            node.assert_live();
            yield_point("linden.pop.claimed");
            if traversed >= self.bound_offset {
                self.restructure(&guard);
            }
            return PopResult::Item(node.entry());
        }
    }

    /// Batched physical deletion: swing the bottom head pointer to the
    /// last deleted node and retire the bypassed prefix. Loses the race
    /// silently when another thread restructures first.
    pub fn restructure(&self, guard: &Guard<'_, '_>) {
        let (first, flagged) = unsafe { (*self.head).succ(0) }.load();
        if !flagged || first.is_null() {
            return;
        }
        // Walk the deleted prefix: interval members are flagged-word
        // nodes; stop at the first unflagged word (the last deleted
        // node) or in front of a node still being inserted.
        let mut interval: Vec<*mut LNode> = Vec::new();
        let mut cur = first;
        loop {
            let node = unsafe { &*cur };
            node.assert_live();
            if node.ext().is_inserting() {
                break;
            }
            let (next, flag) = unsafe { node.succ(0) }.load();
            if !flag || next.is_null() {
                break;
            }
            interval.push(cur);
            cur = next;
        }
        if interval.is_empty() {
            return;
        }
        let target = cur;
        let set: HashSet<*mut LNode> = interval.iter().copied().collect();
        // Deleted nodes precede live ones at every level, so popping
        // interval members off each head pointer unlinks them entirely.
        for lvl in (1..TOWER_SLOTS).rev() {
            loop {
                let (m, _) = unsafe { (*self.head).succ(lvl) }.load();
                if m.is_null() || !set.contains(&m) {
                    break;
                }
                unsafe { (*m).assert_live() };
                let (next, _) = unsafe { (*m).succ(lvl) }.load();
                let _ = unsafe { (*self.head).succ(lvl) }
                    .compare_exchange((m, false), (next, false));
            }
        }
        if unsafe { (*self.head).succ(0) }
            .compare_exchange((first, true), (target, true))
            .is_ok()
        {
            self.counters.record_restructure();
            if validation_enabled() {
                self.validate_unreachable(&set, target);
            }
            for n in interval {
                unsafe { guard.retire(Node::deferred(n)) };
            }
        }
    }

    /// Diagnostic sweep: no node in `set` may be reachable from the
    /// head once the bottom head pointer has swung past the interval.
    fn validate_unreachable(&self, set: &HashSet<*mut LNode>, target: *mut LNode) {
        for lvl in 0..TOWER_SLOTS {
            let mut pred: *mut LNode = self.head;
            let mut cur = unsafe { (*self.head).succ(lvl) }.load().0;
            let mut hops = 0;
            while !cur.is_null() && hops < 1_000_000 {
                if set.contains(&cur) {
                    let pred_ref = unsafe { &*pred };
                    panic!(
                        "retired node still reachable at level {lvl} after {hops} hops: \
                         via pred key {} (head? {}, target? {}, pred-in-set? {}, \
                         pred-inserting? {})",
                        pred_ref.key(),
                        pred == self.head,
                        pred == target,
                        set.contains(&pred),
                        pred_ref.ext().is_inserting(),
                    );
                }
                pred = cur;
                cur = unsafe { (*cur).succ(lvl) }.load().0;
                hops += 1;
            }
        }
    }

    /// Scans the bottom list and checks that flagged words form a
    /// contiguous prefix. Quiescent use only.
    pub fn check_prefix_invariant(&self, _local: &LocalHandle<'_>) -> bool {
        let mut seen_unflagged = unsafe { (*self.head).succ(0) }.load().1 == false;
        let mut cur = unsafe { (*self.head).succ(0) }.load().0;
        while !cur.is_null() {
            let (next, flag) = unsafe { (*cur).succ(0) }.load();
            if flag && seen_unflagged {
                return false;
            }
            if !flag {
                seen_unflagged = true;
            }
            cur = next;
        }
        true
    }

    /// Bottom-level `(key, deleted)` snapshot for tests; quiescent use.
    pub fn bottom_snapshot(&self, _local: &LocalHandle<'_>) -> Vec<(u32, bool)> {
        let mut out = Vec::new();
        let (mut cur, mut edge) = unsafe { (*self.head).succ(0) }.load();
        while !cur.is_null() {
            let node = unsafe { &*cur };
            out.push((node.key(), edge));
            let (next, next_edge) = unsafe { node.succ(0) }.load();
            cur = next;
            edge = next_edge;
        }
        out
    }
}

impl ConcurrentPriorityQueue for LindenQueue {
    fn register(&self) -> Box<dyn QueueHandle + '_> {
        Box::new(LindenHandle {
            queue: self,
            local: self.collector.register(),
            rng: SmallRng::from_os_rng(),
        })
    }

    fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }
}

struct LindenHandle<'a> {
    queue: &'a LindenQueue,
    local: LocalHandle<'a>,
    rng: SmallRng,
}

impl QueueHandle for LindenHandle<'_> {
    fn insert(&mut self, e: Entry) -> Result<(), InsertError> {
        self.queue.insert_entry(&self.local, &mut self.rng, e);
        Ok(())
    }

    fn delete_min(&mut self) -> PopResult {
        self.queue.pop_min(&self.local)
    }
}

impl Drop for LindenQueue {
    fn drop(&mut self) {
        // Free the linked bottom chain (head included); retired nodes
        // are released by the collector's own drop.
        let mut cur = self.head;
        while !cur.is_null() {
            let next = unsafe { (*cur).succ(0) }.load().0;
            unsafe { Node::finalize(cur) };
            cur = next;
        }
    }
}
