//! Benchmark harness for the priority-queue suite.
//!
//! Each run prefills the queue under test with uniform random 32-bit
//! keys, then spawns the configured number of workers pinned to
//! distinct cores (where the platform allows) running a tight loop of
//! inserts and removals in the configured ratio until the clock runs
//! out; prefill time is excluded from the measurement. Runs repeat and
//! the report carries per-run counters plus mean and standard
//! deviation of throughput.

pub mod csv;
pub mod pinning;

use std::sync::atomic::{AtomicBool, Ordering::Relaxed};
use std::sync::Barrier;
use std::time::{Duration, Instant};

use pq_core::{ConcurrentPriorityQueue, Entry, PopResult};
use pq_hunt::HuntHeap;
use pq_krelaxed::KRelaxedQueue;
use pq_linden::LindenQueue;
use pq_shavitlotan::ShavitLotanQueue;
use pq_spray::{SprayParams, SprayQueue};
use rand::prelude::*;
use thiserror::Error;

pub use csv::{emit_csv, parse_csv, CsvRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueKind {
    GlobalLock,
    Hunt,
    ShavitLotan,
    Linden,
    Spray,
    KRelaxed,
}

impl QueueKind {
    pub const ALL: [QueueKind; 6] = [
        QueueKind::GlobalLock,
        QueueKind::Hunt,
        QueueKind::ShavitLotan,
        QueueKind::Linden,
        QueueKind::Spray,
        QueueKind::KRelaxed,
    ];

    /// Strict variants: delete_min returns the exact minimum.
    pub const STRICT: [QueueKind; 4] = [
        QueueKind::GlobalLock,
        QueueKind::Hunt,
        QueueKind::ShavitLotan,
        QueueKind::Linden,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            QueueKind::GlobalLock => "globallock",
            QueueKind::Hunt => "hunt",
            QueueKind::ShavitLotan => "shavitlotan",
            QueueKind::Linden => "linden",
            QueueKind::Spray => "spray",
            QueueKind::KRelaxed => "krelaxed",
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown queue {0:?} (expected globallock|hunt|shavitlotan|linden|spray|krelaxed)")]
    UnknownQueue(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl std::str::FromStr for QueueKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "globallock" => Ok(QueueKind::GlobalLock),
            "hunt" => Ok(QueueKind::Hunt),
            "shavitlotan" => Ok(QueueKind::ShavitLotan),
            "linden" => Ok(QueueKind::Linden),
            "spray" => Ok(QueueKind::Spray),
            "krelaxed" => Ok(QueueKind::KRelaxed),
            other => Err(BenchError::UnknownQueue(other.to_string())),
        }
    }
}

/// Per-variant tuning knobs.
#[derive(Debug, Clone, Copy)]
pub struct VariantKnobs {
    pub bound_offset: usize,
    pub k: usize,
    pub capacity: usize,
    /// Spray parameter P; defaults to the worker thread count.
    pub spray_threads: Option<usize>,
}

impl Default for VariantKnobs {
    fn default() -> Self {
        VariantKnobs {
            bound_offset: pq_linden::DEFAULT_BOUND_OFFSET,
            k: pq_krelaxed::DEFAULT_K,
            capacity: pq_hunt::DEFAULT_CAPACITY,
            spray_threads: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub queue: QueueKind,
    pub threads: usize,
    pub prefill: usize,
    pub duration: Duration,
    pub insert_ratio: f64,
    pub repeats: usize,
    pub seed: u64,
    pub knobs: VariantKnobs,
    pub pin_threads: bool,
}

impl BenchConfig {
    /// Desk-scale defaults mirroring the reference methodology: prefill
    /// 2^15, 50/50 mix over the full 32-bit key range, 10 s, 10 runs.
    pub fn new(queue: QueueKind) -> Self {
        BenchConfig {
            queue,
            threads: 1,
            prefill: 1 << 15,
            duration: Duration::from_secs(10),
            insert_ratio: 0.5,
            repeats: 10,
            seed: 0xbe9c,
            knobs: VariantKnobs::default(),
            pin_threads: true,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.threads < 1 {
            return Err(BenchError::InvalidConfig("threads must be >= 1".into()));
        }
        if self.repeats < 1 {
            return Err(BenchError::InvalidConfig("repeats must be >= 1".into()));
        }
        if self.duration <= Duration::ZERO {
            return Err(BenchError::InvalidConfig("duration must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.insert_ratio) {
            return Err(BenchError::InvalidConfig(
                "insert-ratio must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Measured counters for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub run: usize,
    pub duration_s: f64,
    pub ops_total: u64,
    pub inserts: u64,
    pub pops: u64,
    pub throughput: f64,
    pub cas_failures: u64,
    pub restructures: u64,
    pub resprays: u64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub queue: QueueKind,
    pub threads: usize,
    pub runs: Vec<RunStats>,
    pub mean_throughput: f64,
    pub stddev_throughput: f64,
}

/// Builds a fresh queue instance; collectors are sized for the workers
/// plus harness helpers (prefill, drain, sampling).
pub fn build_queue(
    kind: QueueKind,
    threads: usize,
    knobs: &VariantKnobs,
) -> Box<dyn ConcurrentPriorityQueue> {
    let slots = threads + 4;
    match kind {
        QueueKind::GlobalLock => Box::new(pq_core::GlobalLockQueue::new()),
        QueueKind::Hunt => Box::new(HuntHeap::new(knobs.capacity)),
        QueueKind::ShavitLotan => Box::new(ShavitLotanQueue::new(slots)),
        QueueKind::Linden => Box::new(LindenQueue::with_options(
            slots,
            knobs.bound_offset,
            reclaim_epoch::ReclaimMode::Free,
        )),
        QueueKind::Spray => Box::new(SprayQueue::new(
            slots,
            SprayParams::for_threads(knobs.spray_threads.unwrap_or(threads)),
        )),
        QueueKind::KRelaxed => Box::new(KRelaxedQueue::new(knobs.k)),
    }
}

/// Splitmix-style stream seeding so each (seed, run, thread) triple
/// draws an independent deterministic sequence.
pub fn stream_seed(seed: u64, run: u64, thread: u64) -> u64 {
    let mut z = seed
        .wrapping_add(run.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(thread.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Prefill keys are a pure function of (seed, run): independent of the
/// thread count and generated before any worker starts.
pub fn prefill_keys(seed: u64, run: u64, count: usize) -> Vec<u32> {
    let mut rng = StdRng::seed_from_u64(stream_seed(seed, run, u64::MAX));
    (0..count).map(|_| rng.random()).collect()
}

fn run_once(cfg: &BenchConfig, run_idx: usize) -> RunStats {
    let queue = build_queue(cfg.queue, cfg.threads, &cfg.knobs);
    {
        let mut handle = queue.register();
        for key in prefill_keys(cfg.seed, run_idx as u64, cfg.prefill) {
            handle
                .insert(Entry::new(key, key as u64))
                .expect("prefill exceeded queue capacity");
        }
    }
    let before = queue.counters();
    let barrier = Barrier::new(cfg.threads + 1);
    let pin_warned = AtomicBool::new(false);
    let (ops, elapsed) = std::thread::scope(|s| {
        let workers: Vec<_> = (0..cfg.threads)
            .map(|t| {
                let queue = &*queue;
                let barrier = &barrier;
                let pin_warned = &pin_warned;
                s.spawn(move || {
                    if cfg.pin_threads {
                        if let Err(e) = pinning::pin_current_thread(t) {
                            if !pin_warned.swap(true, Relaxed) {
                                eprintln!("warning: thread pinning unavailable ({e}); continuing unpinned");
                            }
                        }
                    }
                    let mut handle = queue.register();
                    let mut rng =
                        StdRng::seed_from_u64(stream_seed(cfg.seed, run_idx as u64, t as u64));
                    let mut inserts = 0u64;
                    let mut pops = 0u64;
                    barrier.wait();
                    let deadline = Instant::now() + cfg.duration;
                    loop {
                        for _ in 0..64 {
                            if rng.random_bool(cfg.insert_ratio) {
                                let key: u32 = rng.random();
                                if handle.insert(Entry::new(key, key as u64)).is_ok() {
                                    inserts += 1;
                                }
                            } else {
                                let _ = handle.delete_min();
                                pops += 1;
                            }
                        }
                        if Instant::now() >= deadline {
                            break;
                        }
                    }
                    (inserts, pops)
                })
            })
            .collect();
        barrier.wait();
        let start = Instant::now();
        let ops: Vec<(u64, u64)> = workers.into_iter().map(|w| w.join().unwrap()).collect();
        (ops, start.elapsed())
    });
    let after = queue.counters();
    let inserts: u64 = ops.iter().map(|&(i, _)| i).sum();
    let pops: u64 = ops.iter().map(|&(_, p)| p).sum();
    let ops_total = inserts + pops;
    let duration_s = elapsed.as_secs_f64();
    RunStats {
        run: run_idx,
        duration_s,
        ops_total,
        inserts,
        pops,
        throughput: ops_total as f64 / duration_s,
        cas_failures: after.cas_failures - before.cas_failures,
        restructures: after.restructures - before.restructures,
        resprays: after.resprays - before.resprays,
    }
}

pub fn run(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let runs: Vec<RunStats> = (0..cfg.repeats).map(|i| run_once(cfg, i)).collect();
    let mean = runs.iter().map(|r| r.throughput).sum::<f64>() / runs.len() as f64;
    let var = runs
        .iter()
        .map(|r| (r.throughput - mean).powi(2))
        .sum::<f64>()
        / runs.len() as f64;
    Ok(BenchReport {
        queue: cfg.queue,
        threads: cfg.threads,
        runs,
        mean_throughput: mean,
        stddev_throughput: var.sqrt(),
    })
}

/// Drains the queue completely; test and accounting helper.
pub fn drain_all(queue: &dyn ConcurrentPriorityQueue) -> Vec<Entry> {
    let mut handle = queue.register();
    let mut out = Vec::new();
    while let PopResult::Item(e) = handle.delete_min() {
        out.push(e);
    }
    out
}
