//! Correctness instrumentation for the queue suite: concurrent history
//! recording, linearizability and quiescent-consistency checking
//! against the sequential priority-queue semantics, rank-error replay
//! for relaxed variants, and a deterministic interleaving harness.
//!
//! The checkers apply only to strict variants; for relaxed queues no
//! consistency criterion exists, and [`rank::rank_replay`] is the
//! applicable tool.

pub mod broken;
pub mod history;
pub mod lin;
pub mod quiescent;
pub mod rank;
pub mod record;
pub mod schedule;

pub use broken::SecondMinQueue;
pub use history::{EventKind, History, HistoryEvent, OpKind, OpResult, Operation};
pub use lin::{brute_force_linearizable, check_linearizable, CheckError, Verdict, WitnessStep};
pub use quiescent::check_quiescent;
pub use rank::{rank_replay, RankReport};
pub use record::{random_script, record, Recorder};
pub use schedule::{run_scripted, ScheduleError, Script};

#[cfg(test)]
mod tests {
    use super::*;
    use history::{EventKind, HistoryEvent};

    fn complete_op(
        events: &mut Vec<HistoryEvent>,
        time: &mut u64,
        thread: usize,
        op: OpKind,
        result: Option<OpResult>,
    ) {
        events.push(HistoryEvent {
            time: *time,
            thread,
            kind: EventKind::Invoke,
            op,
            result: None,
        });
        events.push(HistoryEvent {
            time: *time + 1,
            thread,
            kind: EventKind::Respond,
            op,
            result,
        });
        *time += 2;
    }

    #[test]
    fn sequential_history_is_linearizable() {
        let mut events = Vec::new();
        let mut t = 0;
        complete_op(&mut events, &mut t, 0, OpKind::Insert(5), None);
        complete_op(&mut events, &mut t, 0, OpKind::Insert(2), None);
        complete_op(
            &mut events,
            &mut t,
            0,
            OpKind::DeleteMin,
            Some(OpResult::Item(2)),
        );
        let h = History::new(events);
        let verdict = check_linearizable(&h).unwrap();
        assert!(verdict.ok);
        assert!(lin::witness_replays(&verdict.witness));
        assert!(check_quiescent(&h).unwrap().ok);
    }

    #[test]
    fn wrong_pop_is_rejected() {
        let mut events = Vec::new();
        let mut t = 0;
        complete_op(&mut events, &mut t, 0, OpKind::Insert(5), None);
        complete_op(&mut events, &mut t, 0, OpKind::Insert(2), None);
        complete_op(
            &mut events,
            &mut t,
            0,
            OpKind::DeleteMin,
            Some(OpResult::Item(5)),
        );
        let h = History::new(events);
        assert!(!check_linearizable(&h).unwrap().ok);
        assert!(!check_quiescent(&h).unwrap().ok);
        assert!(!brute_force_linearizable(&h).unwrap());
    }

    #[test]
    fn concurrent_overlap_allows_reordering() {
        // Two overlapping ops may linearize in either order.
        let events = vec![
            HistoryEvent {
                time: 0,
                thread: 0,
                kind: EventKind::Invoke,
                op: OpKind::Insert(9),
                result: None,
            },
            HistoryEvent {
                time: 1,
                thread: 1,
                kind: EventKind::Invoke,
                op: OpKind::DeleteMin,
                result: None,
            },
            HistoryEvent {
                time: 2,
                thread: 1,
                kind: EventKind::Respond,
                op: OpKind::DeleteMin,
                result: Some(OpResult::Item(9)),
            },
            HistoryEvent {
                time: 3,
                thread: 0,
                kind: EventKind::Respond,
                op: OpKind::Insert(9),
                result: None,
            },
        ];
        let h = History::new(events);
        assert!(check_linearizable(&h).unwrap().ok);
    }

    #[test]
    fn real_time_precedence_is_enforced() {
        // Pop of 9 completes before 9 is ever inserted: not linearizable.
        let mut events = Vec::new();
        let mut t = 0;
        complete_op(
            &mut events,
            &mut t,
            0,
            OpKind::DeleteMin,
            Some(OpResult::Item(9)),
        );
        complete_op(&mut events, &mut t, 1, OpKind::Insert(9), None);
        let h = History::new(events);
        assert!(!check_linearizable(&h).unwrap().ok);
    }

    #[test]
    fn pending_pop_may_explain_missing_item() {
        // insert 1 completes; a pending pop (no response) may have taken
        // it, so a later Empty pop is linearizable.
        let events = vec![
            HistoryEvent {
                time: 0,
                thread: 0,
                kind: EventKind::Invoke,
                op: OpKind::Insert(1),
                result: None,
            },
            HistoryEvent {
                time: 1,
                thread: 0,
                kind: EventKind::Respond,
                op: OpKind::Insert(1),
                result: None,
            },
            HistoryEvent {
                time: 2,
                thread: 1,
                kind: EventKind::Invoke,
                op: OpKind::DeleteMin,
                result: None,
            },
            HistoryEvent {
                time: 3,
                thread: 2,
                kind: EventKind::Invoke,
                op: OpKind::DeleteMin,
                result: None,
            },
            HistoryEvent {
                time: 4,
                thread: 2,
                kind: EventKind::Respond,
                op: OpKind::DeleteMin,
                result: Some(OpResult::Empty),
            },
        ];
        let h = History::new(events);
        assert!(check_linearizable(&h).unwrap().ok);
    }

    #[test]
    fn too_large_history_is_rejected() {
        let mut events = Vec::new();
        let mut t = 0;
        for k in 0..(lin::MAX_CHECK_OPS as u32 + 1) {
            complete_op(&mut events, &mut t, 0, OpKind::Insert(k), None);
        }
        let h = History::new(events);
        assert!(matches!(
            check_linearizable(&h),
            Err(CheckError::HistoryTooLarge { .. })
        ));
    }

    #[test]
    fn quiescent_segments_allow_any_internal_order() {
        // Overlapping segment: pop Empty while 3 is being inserted, then
        // pop 3 later. Linearizable and quiescently consistent.
        let events = vec![
            HistoryEvent {
                time: 0,
                thread: 0,
                kind: EventKind::Invoke,
                op: OpKind::Insert(3),
                result: None,
            },
            HistoryEvent {
                time: 1,
                thread: 1,
                kind: EventKind::Invoke,
                op: OpKind::DeleteMin,
                result: None,
            },
            HistoryEvent {
                time: 2,
                thread: 1,
                kind: EventKind::Respond,
                op: OpKind::DeleteMin,
                result: Some(OpResult::Empty),
            },
            HistoryEvent {
                time: 3,
                thread: 0,
                kind: EventKind::Respond,
                op: OpKind::Insert(3),
                result: None,
            },
            HistoryEvent {
                time: 4,
                thread: 1,
                kind: EventKind::Invoke,
                op: OpKind::DeleteMin,
                result: None,
            },
            HistoryEvent {
                time: 5,
                thread: 1,
                kind: EventKind::Respond,
                op: OpKind::DeleteMin,
                result: Some(OpResult::Item(3)),
            },
        ];
        let h = History::new(events);
        assert!(check_quiescent(&h).unwrap().ok);
    }

    #[test]
    fn quiescent_rejects_impossible_pop() {
        // Pop of a key never inserted fails even with free reordering.
        let mut events = Vec::new();
        let mut t = 0;
        complete_op(&mut events, &mut t, 0, OpKind::Insert(4), None);
        complete_op(
            &mut events,
            &mut t,
            0,
            OpKind::DeleteMin,
            Some(OpResult::Item(8)),
        );
        let h = History::new(events);
        assert!(!check_quiescent(&h).unwrap().ok);
    }

    #[test]
    fn linearizable_implies_quiescently_consistent_on_samples() {
        for seed in 0..30u64 {
            let q = pq_core::GlobalLockQueue::new();
            let script = random_script(3, 3, 5, 0.5, seed);
            let h = record(&q, &script);
            let lin_ok = check_linearizable(&h).unwrap().ok;
            let qc_ok = check_quiescent(&h).unwrap().ok;
            assert!(lin_ok, "global lock must be linearizable (seed {seed})");
            assert!(qc_ok, "linearizable history failed QC (seed {seed})");
        }
    }

    #[test]
    fn checker_agrees_with_brute_force_on_random_histories() {
        let mut mismatches = 0;
        for seed in 0..100u64 {
            let q = pq_core::GlobalLockQueue::new();
            let script = random_script(3, 3, 4, 0.5, seed);
            let h = record(&q, &script);
            let fast = check_linearizable(&h).unwrap().ok;
            let slow = brute_force_linearizable(&h).unwrap();
            if fast != slow {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn second_min_bug_is_caught() {
        let mut caught = false;
        for seed in 0..200u64 {
            let q = SecondMinQueue::new();
            let script = random_script(2, 4, 4, 0.4, seed);
            let h = record(&q, &script);
            if !check_linearizable(&h).unwrap().ok {
                caught = true;
                break;
            }
        }
        assert!(caught, "broken queue never flagged");
    }
}
