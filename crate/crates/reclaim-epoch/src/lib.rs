//! Epoch-based deferred reclamation.
//!
//! Lock-free structures unlink nodes while other threads may still hold
//! references into them. A node is therefore retired rather than freed:
//! it is queued under the epoch current at retirement and reclaimed only
//! once every thread that could have seen it has moved on. The global
//! epoch advances only when all active threads have observed the current
//! value, so a two-epoch grace period guarantees no straggler still
//! holds a reference when the memory is released.
//!
//! Threads register explicitly with the [`Collector`] (the benchmark
//! runs with a fixed thread set), pin an epoch [`Guard`] for the
//! duration of each operation, and retire unlinked nodes through the
//! guard. Reclamation is swept opportunistically every
//! [`ADVANCE_INTERVAL`]th retire and can be forced with
//! [`Collector::try_advance`].
//!
//! For stress tests the collector can run in
//! [`ReclaimMode::PoisonAndLeak`], where reclamation poisons nodes
//! instead of freeing them; instrumented readers then detect any access
//! to reclaimed memory.

use std::cell::Cell;
use std::marker::PhantomData;
use std::sync::atomic::Ordering::{Relaxed, SeqCst};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize};
use std::sync::Mutex;

/// Opportunistic epoch-advance cadence, in retires per thread.
pub const ADVANCE_INTERVAL: usize = 128;

/// What reclamation does with a retired node once its grace period ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReclaimMode {
    /// Run the node's destructor and free its memory.
    Free,
    /// Poison the node and leak it, so instrumented readers can detect
    /// any later access. Test use only.
    PoisonAndLeak,
}

/// A deferred destruction request: a type-erased pointer plus the
/// function that knows how to free (or poison) it.
pub struct Deferred {
    ptr: *mut (),
    run: unsafe fn(*mut (), ReclaimMode),
}

// The pointee is unlinked and owned solely by the reclaimer.
unsafe impl Send for Deferred {}

impl Deferred {
    /// # Safety
    /// `ptr` must be exclusively owned by the reclaimer (already
    /// unlinked from every structure path), and `run` must be safe to
    /// call on it exactly once.
    pub unsafe fn new(ptr: *mut (), run: unsafe fn(*mut (), ReclaimMode)) -> Self {
        Deferred { ptr, run }
    }

    /// Defers dropping a boxed value. Poison mode leaks it.
    pub fn from_box<T: Send + 'static>(b: Box<T>) -> Self {
        unsafe fn run_box<T>(ptr: *mut (), mode: ReclaimMode) {
            if let ReclaimMode::Free = mode {
                drop(unsafe { Box::from_raw(ptr as *mut T) });
            }
        }
        unsafe { Deferred::new(Box::into_raw(b) as *mut (), run_box::<T>) }
    }

    unsafe fn execute(self, mode: ReclaimMode) {
        unsafe { (self.run)(self.ptr, mode) }
    }
}

const EPOCH_SHIFT: u32 = 1;
const ACTIVE_BIT: u64 = 1;

#[repr(align(64))]
struct Slot {
    /// `(observed_epoch << 1) | active`.
    state: AtomicU64,
    claimed: AtomicBool,
    retired: Mutex<Vec<(u64, Deferred)>>,
}

impl Slot {
    fn new() -> Self {
        Slot {
            state: AtomicU64::new(0),
            claimed: AtomicBool::new(false),
            retired: Mutex::new(Vec::new()),
        }
    }
}

/// Counters exposed for tests and instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CollectorStats {
    pub retired: u64,
    pub reclaimed: u64,
    pub global_epoch: u64,
}

/// The shared reclamation state: global epoch, per-thread slots, and
/// per-epoch retire lists.
pub struct Collector {
    global_epoch: AtomicU64,
    slots: Box<[Slot]>,
    /// Garbage adopted from deregistered threads.
    orphans: Mutex<Vec<(u64, Deferred)>>,
    mode: ReclaimMode,
    retired_total: AtomicU64,
    reclaimed_total: AtomicU64,
    registered: AtomicUsize,
}

impl Collector {
    pub fn new(max_threads: usize) -> Self {
        Self::with_mode(max_threads, ReclaimMode::Free)
    }

    pub fn with_mode(max_threads: usize, mode: ReclaimMode) -> Self {
        Collector {
            global_epoch: AtomicU64::new(0),
            slots: (0..max_threads.max(1)).map(|_| Slot::new()).collect(),
            orphans: Mutex::new(Vec::new()),
            mode,
            retired_total: AtomicU64::new(0),
            reclaimed_total: AtomicU64::new(0),
            registered: AtomicUsize::new(0),
        }
    }

    pub fn mode(&self) -> ReclaimMode {
        self.mode
    }

    /// Registers the calling thread, claiming a slot.
    ///
    /// Panics when every slot is taken; the thread set is fixed at pool
    /// startup and sized via `max_threads`.
    pub fn register(&self) -> LocalHandle<'_> {
        for (idx, slot) in self.slots.iter().enumerate() {
            if slot
                .claimed
                .compare_exchange(false, true, SeqCst, Relaxed)
                .is_ok()
            {
                self.registered.fetch_add(1, Relaxed);
                return LocalHandle {
                    collector: self,
                    slot: idx,
                    pinned: Cell::new(false),
                    retires_since_advance: Cell::new(0),
                };
            }
        }
        panic!(
            "reclaim-epoch: thread slots exhausted ({} registered)",
            self.slots.len()
        );
    }

    /// Attempts to advance the global epoch.
    ///
    /// Returns `true` iff this call incremented the epoch, which is
    /// possible only when every active thread has observed the current
    /// value. A successful advance sweeps retire lists for anything two
    /// or more epochs old.
    pub fn try_advance(&self) -> bool {
        let epoch = self.global_epoch.load(SeqCst);
        for slot in self.slots.iter() {
            let s = slot.state.load(SeqCst);
            if s & ACTIVE_BIT != 0 && s >> EPOCH_SHIFT != epoch {
                return false;
            }
        }
        if self
            .global_epoch
            .compare_exchange(epoch, epoch + 1, SeqCst, Relaxed)
            .is_err()
        {
            return false;
        }
        self.sweep(epoch + 1);
        true
    }

    /// Runs every deferred destructor retired at `epoch <= global - 2`.
    fn sweep(&self, global: u64) {
        if global < 2 {
            return;
        }
        let limit = global - 2;
        let mut ready: Vec<Deferred> = Vec::new();
        let mut collect_from = |list: &Mutex<Vec<(u64, Deferred)>>| {
            let mut guard = list.lock().unwrap();
            let mut i = 0;
            while i < guard.len() {
                if guard[i].0 <= limit {
                    let (epoch, d) = guard.swap_remove(i);
                    debug_assert!(self.no_active_thread_at_or_before(epoch));
                    ready.push(d);
                } else {
                    i += 1;
                }
            }
        };
        for slot in self.slots.iter() {
            collect_from(&slot.retired);
        }
        collect_from(&self.orphans);
        self.reclaimed_total.fetch_add(ready.len() as u64, Relaxed);
        for d in ready {
            unsafe { d.execute(self.mode) };
        }
    }

    /// Safety bookkeeping: no active thread may still sit at or before
    /// the epoch a node about to be reclaimed was retired in.
    fn no_active_thread_at_or_before(&self, retire_epoch: u64) -> bool {
        self.slots.iter().all(|slot| {
            let s = slot.state.load(SeqCst);
            s & ACTIVE_BIT == 0 || s >> EPOCH_SHIFT > retire_epoch
        })
    }

    pub fn global_epoch(&self) -> u64 {
        self.global_epoch.load(SeqCst)
    }

    pub fn stats(&self) -> CollectorStats {
        CollectorStats {
            retired: self.retired_total.load(Relaxed),
            reclaimed: self.reclaimed_total.load(Relaxed),
            global_epoch: self.global_epoch(),
        }
    }

    /// Advances until nothing more can be reclaimed. Only meaningful at
    /// quiescence; used by drops and tests.
    pub fn flush(&self) {
        for _ in 0..3 {
            self.try_advance();
        }
    }
}

impl Drop for Collector {
    fn drop(&mut self) {
        // All handles are gone (they borrow the collector), so every
        // remaining deferred node is unreachable and safe to run.
        let mode = self.mode;
        let run = |list: &Mutex<Vec<(u64, Deferred)>>| {
            for (_, d) in list.lock().unwrap().drain(..) {
                unsafe { d.execute(mode) };
            }
        };
        for slot in self.slots.iter() {
            run(&slot.retired);
        }
        run(&self.orphans);
    }
}

/// A registered thread's connection to the collector.
pub struct LocalHandle<'c> {
    collector: &'c Collector,
    slot: usize,
    pinned: Cell<bool>,
    retires_since_advance: Cell<usize>,
}

impl<'c> LocalHandle<'c> {
    /// Marks the thread active at the current global epoch. Nodes
    /// reachable while the guard lives stay valid.
    pub fn pin(&self) -> Guard<'_, 'c> {
        assert!(!self.pinned.get(), "guard already active on this thread");
        self.pinned.set(true);
        let slot = &self.collector.slots[self.slot];
        loop {
            let epoch = self.collector.global_epoch.load(SeqCst);
            slot.state
                .store((epoch << EPOCH_SHIFT) | ACTIVE_BIT, SeqCst);
            // The epoch may have advanced between the read and the
            // store; re-observe so the advancer never misses us.
            if self.collector.global_epoch.load(SeqCst) == epoch {
                return Guard {
                    handle: self,
                    _not_send: PhantomData,
                };
            }
        }
    }

    pub fn collector(&self) -> &'c Collector {
        self.collector
    }

    fn unpin(&self) {
        let slot = &self.collector.slots[self.slot];
        let s = slot.state.load(Relaxed);
        slot.state.store(s & !ACTIVE_BIT, SeqCst);
        self.pinned.set(false);
        if self.retires_since_advance.get() >= ADVANCE_INTERVAL {
            self.retires_since_advance.set(0);
            self.collector.try_advance();
        }
    }
}

impl Drop for LocalHandle<'_> {
    fn drop(&mut self) {
        let slot = &self.collector.slots[self.slot];
        let leftovers: Vec<_> = slot.retired.lock().unwrap().drain(..).collect();
        if !leftovers.is_empty() {
            self.collector.orphans.lock().unwrap().extend(leftovers);
        }
        slot.state.store(0, SeqCst);
        slot.claimed.store(false, SeqCst);
        self.collector.registered.fetch_sub(1, Relaxed);
    }
}

/// Proof that the owning thread is active; traversals hold one for the
/// duration of an operation. Not transferable between threads.
pub struct Guard<'h, 'c> {
    handle: &'h LocalHandle<'c>,
    _not_send: PhantomData<*mut ()>,
}

impl Guard<'_, '_> {
    /// Queues `d` on the current epoch's retire list.
    ///
    /// # Safety
    /// The pointee must already be unlinked from every structure path;
    /// no new references to it can be created after this call.
    pub unsafe fn retire(&self, d: Deferred) {
        let collector = self.handle.collector;
        let epoch = collector.global_epoch.load(SeqCst);
        collector.slots[self.handle.slot]
            .retired
            .lock()
            .unwrap()
            .push((epoch, d));
        collector.retired_total.fetch_add(1, Relaxed);
        self.handle
            .retires_since_advance
            .set(self.handle.retires_since_advance.get() + 1);
    }

    pub fn collector(&self) -> &Collector {
        self.handle.collector
    }
}

impl Drop for Guard<'_, '_> {
    fn drop(&mut self) {
        self.handle.unpin();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use std::sync::atomic::AtomicUsize;
    use std::sync::Arc;

    fn counting_deferred(counter: &Arc<AtomicUsize>) -> Deferred {
        struct Probe(Arc<AtomicUsize>);
        impl Drop for Probe {
            fn drop(&mut self) {
                self.0.fetch_add(1, Relaxed);
            }
        }
        Deferred::from_box(Box::new(Probe(Arc::clone(counter))))
    }

    #[test]
    fn pin_unpin_without_retires_reclaims_nothing() {
        let c = Collector::new(2);
        let h = c.register();
        drop(h.pin());
        c.flush();
        assert_eq!(c.stats().reclaimed, 0);
    }

    #[test]
    fn pinned_thread_blocks_reclamation() {
        let c = Collector::new(2);
        let t1 = c.register();
        let t2 = c.register();
        let dropped = Arc::new(AtomicUsize::new(0));

        let g1 = t1.pin();
        {
            let g2 = t2.pin();
            unsafe { g2.retire(counting_deferred(&dropped)) };
        }
        // t1 is still pinned at the retire epoch: one advance is
        // possible (it observed the current epoch), a second is not.
        assert!(c.try_advance());
        assert!(!c.try_advance());
        assert_eq!(dropped.load(Relaxed), 0);
        assert_eq!(c.stats().reclaimed, 0);

        drop(g1);
        c.flush();
        assert_eq!(dropped.load(Relaxed), 1);
        assert_eq!(c.stats().reclaimed, 1);
    }

    #[test]
    fn two_quiescent_advances_reclaim() {
        let c = Collector::new(1);
        let h = c.register();
        let dropped = Arc::new(AtomicUsize::new(0));
        {
            let g = h.pin();
            unsafe { g.retire(counting_deferred(&dropped)) };
        }
        assert!(c.try_advance());
        assert_eq!(dropped.load(Relaxed), 0);
        assert!(c.try_advance());
        assert_eq!(dropped.load(Relaxed), 1);
    }

    #[test]
    fn thousand_retires_fully_reclaimed_at_quiescence() {
        let c = Collector::new(1);
        let h = c.register();
        let dropped = Arc::new(AtomicUsize::new(0));
        for _ in 0..1000 {
            let g = h.pin();
            unsafe { g.retire(counting_deferred(&dropped)) };
        }
        c.flush();
        assert_eq!(dropped.load(Relaxed), 1000);
        let stats = c.stats();
        assert_eq!(stats.retired, 1000);
        assert_eq!(stats.reclaimed, 1000);
    }

    #[test]
    fn try_advance_no_active_threads() {
        let c = Collector::new(4);
        assert!(c.try_advance());
        assert_eq!(c.global_epoch(), 1);
    }

    #[test]
    fn try_advance_blocked_by_stale_thread() {
        let c = Collector::new(2);
        let h = c.register();
        let g = h.pin();
        assert!(c.try_advance()); // pinned thread observed current epoch
        assert!(!c.try_advance()); // now it is one behind
        drop(g);
        assert!(c.try_advance());
    }

    #[test]
    fn epoch_monotone_under_random_schedule() {
        let c = Collector::new(3);
        let h1 = c.register();
        let h2 = c.register();
        let mut rng = StdRng::seed_from_u64(7);
        let mut g1 = None;
        let mut g2 = None;
        let mut last = c.global_epoch();
        for _ in 0..10_000 {
            match rng.random_range(0..5u8) {
                0 => g1 = None,
                1 => {
                    if g1.is_none() {
                        g1 = Some(h1.pin());
                    }
                }
                2 => g2 = None,
                3 => {
                    if g2.is_none() {
                        g2 = Some(h2.pin());
                    }
                }
                _ => {
                    c.try_advance();
                }
            }
            let now = c.global_epoch();
            assert!(now >= last);
            last = now;
        }
        drop(g1);
        drop(g2);
    }

    #[test]
    fn concurrent_stress_reclaims_everything() {
        let c = Collector::new(3);
        let dropped = Arc::new(AtomicUsize::new(0));
        let total = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for seed in 0..3u64 {
                let c = &c;
                let dropped = &dropped;
                let total = &total;
                s.spawn(move || {
                    let h = c.register();
                    let mut rng = StdRng::seed_from_u64(seed);
                    for _ in 0..3_000 {
                        let g = h.pin();
                        if rng.random_bool(0.8) {
                            unsafe { g.retire(counting_deferred(dropped)) };
                            total.fetch_add(1, Relaxed);
                        }
                    }
                });
            }
        });
        c.flush();
        assert_eq!(dropped.load(Relaxed), total.load(Relaxed));
    }

    #[test]
    fn poison_mode_does_not_free() {
        let c = Collector::with_mode(1, ReclaimMode::PoisonAndLeak);
        let h = c.register();
        let dropped = Arc::new(AtomicUsize::new(0));
        {
            let g = h.pin();
            unsafe { g.retire(counting_deferred(&dropped)) };
        }
        c.flush();
        // Reclaimed per the collector's accounting, but never dropped.
        assert_eq!(c.stats().reclaimed, 1);
        assert_eq!(dropped.load(Relaxed), 0);
        drop(h);
    }

    #[test]
    fn orphaned_garbage_is_adopted() {
        let c = Collector::new(2);
        let dropped = Arc::new(AtomicUsize::new(0));
        {
            let h = c.register();
            let g = h.pin();
            unsafe { g.retire(counting_deferred(&dropped)) };
        }
        c.flush();
        assert_eq!(dropped.load(Relaxed), 1);
    }
}
