//! Quiescent-consistency checking.
//!
//! A quiescent point is an instant with zero operations in flight.
//! Quiescent consistency requires the operations between consecutive
//! quiescent points to be reorderable (arbitrarily, ignoring real-time
//! and even per-thread order) into a sequence that replays correctly,
//! with cross-segment order preserved. Since an operation's multiset
//! effect is fixed by its recorded result, each segment can be checked
//! independently against the state its predecessors left behind.

use std::collections::HashSet;

use crate::history::{History, HistoryError, OpKind, OpResult, Operation};
use crate::lin::{CheckError, Verdict, WitnessStep, MAX_CHECK_OPS};

pub fn check_quiescent(h: &History) -> Result<Verdict, CheckError> {
    let ops = h.operations()?;
    if ops.iter().any(|o| o.respond.is_none()) {
        return Err(CheckError::Malformed(HistoryError::Malformed(
            "quiescent check requires a complete history".into(),
        )));
    }
    let segments = split_at_quiescence(&ops);
    if let Some(seg) = segments.iter().find(|s| s.len() > MAX_CHECK_OPS) {
        return Err(CheckError::HistoryTooLarge {
            ops: seg.len(),
            max: MAX_CHECK_OPS,
        });
    }
    let mut state: Vec<u32> = Vec::new();
    let mut witness = Vec::new();
    for segment in &segments {
        match order_segment(segment, state.clone()) {
            Some((steps, next_state)) => {
                witness.extend(steps);
                state = next_state;
            }
            None => {
                return Ok(Verdict {
                    ok: false,
                    witness: Vec::new(),
                    explanation: Some(format!(
                        "segment of {} operations admits no valid ordering",
                        segment.len()
                    )),
                })
            }
        }
    }
    Ok(Verdict {
        ok: true,
        witness,
        explanation: None,
    })
}

/// Groups operations into maximal runs not separated by a quiescent
/// point. Operations never straddle such a point by definition.
fn split_at_quiescence(ops: &[Operation]) -> Vec<Vec<Operation>> {
    let mut sorted: Vec<Operation> = ops.to_vec();
    sorted.sort_by_key(|o| o.invoke);
    let mut segments = Vec::new();
    let mut current: Vec<Operation> = Vec::new();
    let mut open_until = 0u64;
    for op in sorted {
        if !current.is_empty() && op.invoke > open_until {
            segments.push(std::mem::take(&mut current));
        }
        open_until = open_until.max(op.respond.unwrap());
        current.push(op);
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
}

/// Finds any permutation of the segment replaying correctly from
/// `state`. Returns the steps and the outgoing state.
fn order_segment(
    segment: &[Operation],
    state: Vec<u32>,
) -> Option<(Vec<WitnessStep>, Vec<u32>)> {
    fn recurse(
        segment: &[Operation],
        mask: u64,
        state: &mut Vec<u32>,
        memo: &mut HashSet<u64>,
        order: &mut Vec<usize>,
    ) -> bool {
        if order.len() == segment.len() {
            return true;
        }
        // The outgoing multiset is fixed by the set of applied ops, so
        // memoizing on the mask alone is sound here.
        if !memo.insert(mask) {
            return false;
        }
        for (i, op) in segment.iter().enumerate() {
            if mask & (1 << i) != 0 {
                continue;
            }
            let valid = match (op.op, op.result) {
                (OpKind::Insert(k), _) => {
                    let idx = state.partition_point(|&x| x <= k);
                    state.insert(idx, k);
                    true
                }
                (OpKind::DeleteMin, Some(OpResult::Item(k))) => {
                    if state.first() == Some(&k) {
                        state.remove(0);
                        true
                    } else {
                        false
                    }
                }
                (OpKind::DeleteMin, Some(OpResult::Empty)) => state.is_empty(),
                (OpKind::DeleteMin, None) => false,
            };
            if valid {
                order.push(i);
                if recurse(segment, mask | 1 << i, state, memo, order) {
                    return true;
                }
                order.pop();
                // Undo.
                match (op.op, op.result) {
                    (OpKind::Insert(k), _) => {
                        let idx = state.iter().position(|&x| x == k).unwrap();
                        state.remove(idx);
                    }
                    (OpKind::DeleteMin, Some(OpResult::Item(k))) => {
                        state.insert(0, k);
                        debug_assert!(state.windows(2).all(|w| w[0] <= w[1]));
                    }
                    _ => {}
                }
            }
        }
        false
    }

    let mut state = state;
    let mut memo = HashSet::new();
    let mut order = Vec::new();
    if recurse(segment, 0, &mut state, &mut memo, &mut order) {
        let steps = order
            .iter()
            .map(|&i| WitnessStep {
                thread: segment[i].thread,
                op: segment[i].op,
                result: segment[i].result,
            })
            .collect();
        Some((steps, state))
    } else {
        None
    }
}
