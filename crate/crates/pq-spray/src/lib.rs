//! Relaxed skip-list queue that spreads `delete_min` over the
//! near-minimal prefix.
//!
//! Instead of fighting over the head, each removal performs a spray: a
//! randomized descending walk that lands on one of the first
//! O(P log^3 P) elements, each chosen roughly uniformly. A landing on a
//! live node claims it by winning its deletion mark and returns
//! immediately; physical unlinking is left to cleaners, which a thread
//! becomes with small probability after landing on an already-deleted
//! node. Dummy nodes in front of the list offset the walk's bias
//! against the very first positions and are never returned.
//!
//! Inserts are plain skip-list inserts.

use pq_core::{
    ConcurrentPriorityQueue, CounterSnapshot, Entry, InsertError, OpCounters, PopResult,
    QueueHandle,
};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use reclaim_epoch::{Guard, LocalHandle, ReclaimMode};
use skiplist_lockfree::{generate_level, Node, SkipList, MAX_LEVEL};

/// Spray attempts before falling back to a linear scan, which settles
/// emptiness definitively.
const RESPRAY_LIMIT: usize = 16;

/// Walk parameters, derived from the expected thread count.
///
/// A jump at level `l` skips about `2^l` bottom elements, so the walk's
/// expected reach is around `max_jump * 2^(start_height + 1)`, of order
/// P log^3 P.
#[derive(Debug, Clone)]
pub struct SprayParams {
    /// Expected concurrency P.
    pub threads: usize,
    /// Starting level H of the walk.
    pub start_height: usize,
    /// Uniform jump bound M: each level advances 0..=M steps.
    pub max_jump: usize,
    /// Levels descended per round (D).
    pub descent: usize,
    /// Untaken front sentinels masking the bias against early slots.
    pub dummy_count: usize,
    /// Chance that a landing on a deleted node turns the caller into a
    /// cleaner.
    pub cleaner_probability: f64,
}

impl SprayParams {
    pub fn for_threads(p: usize) -> Self {
        let p = p.max(1);
        let cubed = ((p + 1) as f64).log2().powi(3);
        let start_height = ((p as f64).log2().ceil() as usize + 1).min(MAX_LEVEL);
        // Half the cubed-log bound: jumps are uniform in [0, M], so the
        // mean walk reaches M/2 per level and the worst case stays well
        // inside the P log^3 P envelope.
        let max_jump = ((cubed / 2.0).ceil() as usize).max(1);
        // The landing density is suppressed near the very front (a walk
        // rarely draws near-zero jumps at every level). Padding by the
        // mean reach puts the first real element at the distribution's
        // mode, where landings are dense and locally uniform. Still
        // Theta(P log^3 P) nodes.
        let mean_reach = max_jump * ((1usize << (start_height + 1)) - 1) / 2;
        SprayParams {
            threads: p,
            start_height,
            max_jump,
            descent: 1,
            dummy_count: mean_reach.max(1),
            cleaner_probability: 1.0 / p as f64,
        }
    }
}

/// Node extension: dummies sit in front of every real key and are
/// never handed out.
#[derive(Debug, Default)]
pub struct SprayExt {
    dummy: bool,
}

pub struct SprayQueue {
    list: SkipList<SprayExt>,
    params: SprayParams,
    counters: OpCounters,
}

impl SprayQueue {
    pub fn new(max_threads: usize, params: SprayParams) -> Self {
        Self::with_mode(max_threads, params, ReclaimMode::Free)
    }

    pub fn with_mode(max_threads: usize, params: SprayParams, mode: ReclaimMode) -> Self {
        let queue = SprayQueue {
            list: SkipList::with_mode(max_threads + 1, mode),
            params,
            counters: OpCounters::new(),
        };
        // Dummies: key 0 with the earliest sequence numbers, so they
        // order before every real key (real key-0 nodes get later
        // sequence numbers).
        let handle = queue.list.register();
        let mut rng = SmallRng::seed_from_u64(0x5952a1);
        for _ in 0..queue.params.dummy_count {
            let guard = handle.pin();
            let level = generate_level(&mut rng);
            queue
                .list
                .insert_at_level(&guard, Entry::new(0, 0), level, SprayExt { dummy: true });
        }
        drop(handle);
        queue
    }

    pub fn params(&self) -> &SprayParams {
        &self.params
    }

    pub fn list(&self) -> &SkipList<SprayExt> {
        &self.list
    }

    pub fn register_reclaim(&self) -> LocalHandle<'_> {
        self.list.register()
    }

    /// The randomized descending walk. Starts at `start_height` on the
    /// head tower, advances a uniform number of steps per level, and
    /// descends until level 0. Returns the landing node, which may be
    /// the head, a dummy, or an already-deleted node.
    pub fn spray_walk(&self, _guard: &Guard<'_, '_>, rng: &mut SmallRng) -> *mut Node<SprayExt> {
        let mut pos = self.list.head();
        let mut level = self.params.start_height;
        loop {
            let mut steps = rng.random_range(0..=self.params.max_jump);
            while steps > 0 {
                let (next, _) = unsafe { (*pos).succ(level) }.load();
                if next.is_null() {
                    break;
                }
                unsafe { (*next).assert_live() };
                pos = next;
                steps -= 1;
            }
            if level == 0 {
                return pos;
            }
            level = level.saturating_sub(self.params.descent.max(1));
        }
    }

    /// Physically unlink logically deleted nodes from the front region.
    fn clean(&self, guard: &Guard<'_, '_>) {
        let mut removed = 0;
        let mut pos = self.list.head();
        loop {
            let (cur, _) = unsafe { (*pos).succ(0) }.load();
            if cur.is_null() || removed >= 512 {
                return;
            }
            let node = unsafe { &*cur };
            node.assert_live();
            let (_, marked) = unsafe { node.succ(0) }.load();
            if marked {
                unsafe { self.list.unlink(guard, cur) };
                removed += 1;
                // The unlink excised it; re-read our successor.
                continue;
            }
            if node.ext().dummy {
                pos = cur;
                continue;
            }
            // Deleted nodes cluster near the front; stop at the first
            // live real node.
            return;
        }
    }

    fn pop_min(&self, local: &LocalHandle<'_>, rng: &mut SmallRng) -> PopResult {
        let guard = local.pin();
        for _ in 0..RESPRAY_LIMIT {
            let landing = self.spray_walk(&guard, rng);
            if landing == self.list.head() {
                self.counters.record_respray();
                continue;
            }
            let node = unsafe { &*landing };
            if node.ext().dummy {
                self.counters.record_respray();
                continue;
            }
            let (_, marked) = unsafe { node.succ(0) }.load();
            if marked {
                if rng.random_bool(self.params.cleaner_probability) {
                    self.clean(&guard);
                }
                self.counters.record_respray();
                continue;
            }
            if unsafe { self.list.mark_delete(landing) } {
                return PopResult::Item(node.entry());
            }
            self.counters.record_cas_failure();
        }
        // Linear fallback: guarantees emptiness detection terminates.
        let mut pos = self.list.head();
        loop {
            let (cur, _) = unsafe { (*pos).succ(0) }.load();
            if cur.is_null() {
                return PopResult::Empty;
            }
            let node = unsafe { &*cur };
            node.assert_live();
            let (_, marked) = unsafe { node.succ(0) }.load();
            if !marked && !node.ext().dummy && unsafe { self.list.mark_delete(cur) } {
                return PopResult::Item(node.entry());
            }
            pos = cur;
        }
    }
}

impl ConcurrentPriorityQueue for SprayQueue {
    fn register(&self) -> Box<dyn QueueHandle + '_> {
        Box::new(SprayHandle {
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
            resprays: mine.resprays,
        }
    }
}

struct SprayHandle<'a> {
    queue: &'a SprayQueue,
    local: LocalHandle<'a>,
    rng: SmallRng,
}

impl SprayHandle<'_> {
    /// Seeded handle for deterministic walk tests.
    fn with_seed(queue: &SprayQueue, seed: u64) -> SprayHandle<'_> {
        SprayHandle {
            queue,
            local: queue.list.register(),
            rng: SmallRng::seed_from_u64(seed),
        }
    }
}

impl QueueHandle for SprayHandle<'_> {
    fn insert(&mut self, e: Entry) -> Result<(), InsertError> {
        let guard = self.local.pin();
        let level = generate_level(&mut self.rng);
        self.queue
            .list
            .insert_at_level(&guard, e, level, SprayExt::default());
        Ok(())
    }

    fn delete_min(&mut self) -> PopResult {
        self.queue.pop_min(&self.local, &mut self.rng)
    }
}

/// Registers a handle with a fixed walk seed; instrumentation for the
/// spray-distribution tests.
pub fn seeded_handle(queue: &SprayQueue, seed: u64) -> impl QueueHandle + '_ {
    SprayHandle::with_seed(queue, seed)
}

/// Runs `n` seeded spray walks and reports each landing's raw bottom
/// position (dummies count as positions).
pub fn landing_positions(queue: &SprayQueue, seed: u64, n: usize) -> Vec<Option<usize>> {
    let local = queue.list.register();
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let guard = local.pin();
        let landing = queue.spray_walk(&guard, &mut rng);
        if landing == queue.list.head() {
            out.push(None);
        } else {
            out.push(queue.list.bottom_position(&guard, landing));
        }
    }
    out
}
