//! Concurrent history recording.
//!
//! A workload script assigns each thread a sequence of operations; the
//! recorder runs them against a queue and logs invocation and response
//! events stamped from one global atomic counter — totally ordered and
//! exactly replayable.

use std::sync::atomic::{AtomicU64, Ordering::SeqCst};
use std::sync::Barrier;

use pq_core::{ConcurrentPriorityQueue, Entry, PopResult};
use rand::prelude::*;

use crate::history::{EventKind, History, HistoryEvent, OpKind, OpResult};

/// Global order source shared by every recording thread.
#[derive(Debug, Default)]
pub struct Recorder {
    clock: AtomicU64,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stamp(&self) -> u64 {
        self.clock.fetch_add(1, SeqCst)
    }
}

/// Runs `script[t]` on thread `t` against `queue` and returns the
/// recorded history. All operations run to completion.
pub fn record<Q: ConcurrentPriorityQueue + ?Sized>(queue: &Q, script: &[Vec<OpKind>]) -> History {
    let recorder = Recorder::new();
    let barrier = Barrier::new(script.len());
    let logs: Vec<Vec<HistoryEvent>> = std::thread::scope(|s| {
        script
            .iter()
            .enumerate()
            .map(|(tid, ops)| {
                let recorder = &recorder;
                let barrier = &barrier;
                let queue = &*queue;
                s.spawn(move || {
                    let mut handle = queue.register();
                    let mut log = Vec::with_capacity(ops.len() * 2);
                    barrier.wait();
                    for &op in ops {
                        log.push(HistoryEvent {
                            time: recorder.stamp(),
                            thread: tid,
                            kind: EventKind::Invoke,
                            op,
                            result: None,
                        });
                        let result = match op {
                            OpKind::Insert(k) => {
                                handle.insert(Entry::from_key(k)).expect("insert failed");
                                None
                            }
                            OpKind::DeleteMin => Some(match handle.delete_min() {
                                PopResult::Item(e) => OpResult::Item(e.key),
                                PopResult::Empty => OpResult::Empty,
                            }),
                        };
                        log.push(HistoryEvent {
                            time: recorder.stamp(),
                            thread: tid,
                            kind: EventKind::Respond,
                            op,
                            result,
                        });
                    }
                    log
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|h| h.join().unwrap())
            .collect()
    });
    History::new(logs.into_iter().flatten().collect())
}

/// Seeded random workload: `threads` scripts of `ops_per_thread`
/// operations, keys uniform below `key_range`, pops with the given
/// probability.
pub fn random_script(
    threads: usize,
    ops_per_thread: usize,
    key_range: u32,
    pop_ratio: f64,
    seed: u64,
) -> Vec<Vec<OpKind>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..threads)
        .map(|_| {
            (0..ops_per_thread)
                .map(|_| {
                    if rng.random_bool(pop_ratio) {
                        OpKind::DeleteMin
                    } else {
                        OpKind::Insert(rng.random_range(0..key_range))
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use pq_core::GlobalLockQueue;

    #[test]
    fn single_thread_history_alternates() {
        let q = GlobalLockQueue::new();
        let script = vec![vec![
            OpKind::Insert(4),
            OpKind::DeleteMin,
            OpKind::DeleteMin,
        ]];
        let h = record(&q, &script);
        assert_eq!(h.events.len(), 6);
        for pair in h.events.chunks(2) {
            assert_eq!(pair[0].kind, EventKind::Invoke);
            assert_eq!(pair[1].kind, EventKind::Respond);
        }
        assert_eq!(h.events[3].result, Some(OpResult::Item(4)));
        assert_eq!(h.events[5].result, Some(OpResult::Empty));
    }

    #[test]
    fn two_thread_history_is_well_formed() {
        let q = GlobalLockQueue::new();
        let script = random_script(2, 6, 8, 0.5, 3);
        let h = record(&q, &script);
        let ops = h.operations().unwrap();
        assert_eq!(ops.len(), 12);
        assert!(ops.iter().all(|o| o.respond.is_some()));
        assert!(ops.iter().all(|o| o.invoke < o.respond.unwrap()));
    }

    #[test]
    fn recorded_multiset_is_conserved() {
        let q = GlobalLockQueue::new();
        let script = random_script(3, 10, 6, 0.4, 9);
        let h = record(&q, &script);
        let mut inserted = Vec::new();
        let mut popped = Vec::new();
        for op in h.operations().unwrap() {
            match (op.op, op.result) {
                (OpKind::Insert(k), _) => inserted.push(k),
                (OpKind::DeleteMin, Some(OpResult::Item(k))) => popped.push(k),
                _ => {}
            }
        }
        popped.extend(q.register().drain().iter().map(|e| e.key));
        inserted.sort_unstable();
        popped.sort_unstable();
        assert_eq!(inserted, popped);
    }
}
