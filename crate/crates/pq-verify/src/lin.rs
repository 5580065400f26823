//! Linearizability checking for priority-queue histories.
//!
//! The checker searches for a total order of the operations that
//! respects real-time precedence (an operation that responded before
//! another was invoked must come first) and replays correctly against
//! the sequential priority-queue semantics. The search linearizes one
//! eligible operation at a time and backtracks, memoizing failed
//! configurations so each is explored once.
//!
//! Operations left pending in the history may have taken effect or not;
//! the search is free to linearize them (choosing the result the
//! sequential semantics dictate) or to leave them out.

use std::collections::HashSet;

use crate::history::{History, HistoryError, OpKind, OpResult, Operation};

/// Exhaustive-search cutoff; the search is factorial in the worst case.
pub const MAX_CHECK_OPS: usize = 14;

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error("history too large for exhaustive checking: {ops} ops (max {max})")]
    HistoryTooLarge { ops: usize, max: usize },
    #[error(transparent)]
    Malformed(#[from] HistoryError),
}

/// One step of a sequential witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WitnessStep {
    pub thread: usize,
    pub op: OpKind,
    pub result: Option<OpResult>,
}

/// Checker outcome. When `ok`, `witness` is a sequential order whose
/// replay reproduces every response; otherwise `explanation` describes
/// the failure.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub ok: bool,
    pub witness: Vec<WitnessStep>,
    pub explanation: Option<String>,
}

/// Sorted multiset of keys; the sequential abstract state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
struct Multiset(Vec<u32>);

impl Multiset {
    fn insert(&mut self, key: u32) {
        let idx = self.0.partition_point(|&k| k <= key);
        self.0.insert(idx, key);
    }

    fn min(&self) -> Option<u32> {
        self.0.first().copied()
    }

    fn remove_min(&mut self) -> Option<u32> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.remove(0))
        }
    }
}

/// Applies `op` to `state` if its fixed result is consistent; pending
/// pops adopt whatever the sequential semantics dictate.
fn apply(op: &Operation, state: &mut Multiset) -> Option<Option<OpResult>> {
    match op.op {
        OpKind::Insert(k) => {
            state.insert(k);
            Some(None)
        }
        OpKind::DeleteMin => match op.result {
            Some(OpResult::Item(k)) => {
                if state.min() == Some(k) {
                    state.remove_min();
                    Some(Some(OpResult::Item(k)))
                } else {
                    None
                }
            }
            Some(OpResult::Empty) => {
                if state.min().is_none() {
                    Some(Some(OpResult::Empty))
                } else {
                    None
                }
            }
            None => Some(Some(match state.remove_min() {
                Some(k) => OpResult::Item(k),
                None => OpResult::Empty,
            })),
        },
    }
}

pub fn check_linearizable(h: &History) -> Result<Verdict, CheckError> {
    let ops = h.operations()?;
    if ops.len() > MAX_CHECK_OPS {
        return Err(CheckError::HistoryTooLarge {
            ops: ops.len(),
            max: MAX_CHECK_OPS,
        });
    }
    let completed: u64 = ops
        .iter()
        .enumerate()
        .filter(|(_, o)| o.respond.is_some())
        .fold(0, |m, (i, _)| m | 1 << i);
    let mut memo: HashSet<(u64, Multiset)> = HashSet::new();
    let mut order: Vec<usize> = Vec::new();
    let found = search(&ops, completed, 0, Multiset::default(), &mut memo, &mut order);
    match found {
        Some(results) => {
            let witness = order
                .iter()
                .zip(results)
                .map(|(&i, result)| WitnessStep {
                    thread: ops[i].thread,
                    op: ops[i].op,
                    result,
                })
                .collect();
            Ok(Verdict {
                ok: true,
                witness,
                explanation: None,
            })
        }
        None => Ok(Verdict {
            ok: false,
            witness: Vec::new(),
            explanation: Some(format!(
                "no order of the {} operations consistent with real-time \
                 precedence replays correctly on the sequential queue",
                ops.len()
            )),
        }),
    }
}

/// Depth-first search for a valid linearization. `mask` holds the
/// already-linearized ops; returns the chosen results along `order`.
fn search(
    ops: &[Operation],
    completed: u64,
    mask: u64,
    state: Multiset,
    memo: &mut HashSet<(u64, Multiset)>,
    order: &mut Vec<usize>,
) -> Option<Vec<Option<OpResult>>> {
    if completed & !mask == 0 {
        return Some(Vec::new());
    }
    if !memo.insert((mask, state.clone())) {
        return None;
    }
    // An operation may linearize next only if no other un-linearized
    // completed operation responded before it was invoked.
    let min_respond = ops
        .iter()
        .enumerate()
        .filter(|&(i, o)| mask & (1 << i) == 0 && o.respond.is_some())
        .map(|(_, o)| o.respond.unwrap())
        .min()
        .unwrap_or(u64::MAX);
    for (i, op) in ops.iter().enumerate() {
        if mask & (1 << i) != 0 || op.invoke > min_respond {
            continue;
        }
        let mut next_state = state.clone();
        if let Some(result) = apply(op, &mut next_state) {
            order.push(i);
            if let Some(mut rest) =
                search(ops, completed, mask | 1 << i, next_state, memo, order)
            {
                rest.insert(0, result);
                return Some(rest);
            }
            order.pop();
        }
    }
    None
}

/// Independent oracle: enumerates every total order consistent with
/// real-time precedence and replays each on a [`pq_core::SeqHeap`].
/// Only supports complete histories; exponential, test-scale only.
pub fn brute_force_linearizable(h: &History) -> Result<bool, CheckError> {
    let ops = h.operations()?;
    if ops.iter().any(|o| o.respond.is_none()) {
        return Err(CheckError::Malformed(HistoryError::Malformed(
            "brute-force oracle requires a complete history".into(),
        )));
    }
    if ops.len() > MAX_CHECK_OPS {
        return Err(CheckError::HistoryTooLarge {
            ops: ops.len(),
            max: MAX_CHECK_OPS,
        });
    }
    fn recurse(ops: &[Operation], used: &mut Vec<bool>, heap: &mut pq_core::SeqHeap) -> bool {
        if used.iter().all(|&u| u) {
            return true;
        }
        for i in 0..ops.len() {
            if used[i] {
                continue;
            }
            // Real-time precedence: anything that responded before our
            // invocation must already be placed.
            if ops.iter().enumerate().any(|(j, o)| {
                !used[j] && j != i && o.respond.unwrap() < ops[i].invoke
            }) {
                continue;
            }
            let snapshot = heap.clone();
            let valid = match (ops[i].op, ops[i].result) {
                (OpKind::Insert(k), _) => {
                    heap.insert(pq_core::Entry::from_key(k));
                    true
                }
                (OpKind::DeleteMin, Some(OpResult::Item(k))) => match heap.delete_min() {
                    pq_core::PopResult::Item(e) => e.key == k,
                    pq_core::PopResult::Empty => false,
                },
                (OpKind::DeleteMin, Some(OpResult::Empty)) => {
                    matches!(heap.delete_min(), pq_core::PopResult::Empty)
                }
                (OpKind::DeleteMin, None) => unreachable!("complete history"),
            };
            if valid {
                used[i] = true;
                if recurse(ops, used, heap) {
                    return true;
                }
                used[i] = false;
            }
            *heap = snapshot;
        }
        false
    }
    let mut used = vec![false; ops.len()];
    let mut heap = pq_core::SeqHeap::new();
    Ok(recurse(&ops, &mut used, &mut heap))
}

/// Replays a witness on the sequential heap oracle, checking that every
/// recorded response is reproduced. Used to validate verdicts.
pub fn witness_replays(witness: &[WitnessStep]) -> bool {
    let mut heap = pq_core::SeqHeap::new();
    for step in witness {
        match step.op {
            OpKind::Insert(k) => heap.insert(pq_core::Entry::from_key(k)),
            OpKind::DeleteMin => {
                let got = match heap.delete_min() {
                    pq_core::PopResult::Item(e) => OpResult::Item(e.key),
                    pq_core::PopResult::Empty => OpResult::Empty,
                };
                match step.result {
                    Some(want) if want != got => return false,
                    None => return false,
                    _ => {}
                }
            }
        }
    }
    true
}
