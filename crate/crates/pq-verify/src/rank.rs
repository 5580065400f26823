//! Rank-error replay for relaxed queues.
//!
//! Replays a history in event order against its own live multiset:
//! inserted keys join the multiset at invocation (an element can be
//! popped by another thread before its inserter's response lands in the
//! log), and each pop response reports the rank of the returned key,
//! where rank 1 is the minimum. Strict queues driven sequentially
//! produce all-ones; relaxed queues must stay within their advertised
//! bound.

use std::collections::BTreeMap;

use crate::history::{EventKind, History, OpKind, OpResult};

#[derive(Debug, Clone, Default)]
pub struct RankReport {
    /// Rank of every popped item, in response order.
    pub ranks: Vec<usize>,
    pub max_rank: usize,
    /// Pops whose rank exceeded the bound.
    pub violations: usize,
    /// Pops that returned no item.
    pub empties: usize,
}

pub fn rank_replay(h: &History, bound: usize) -> RankReport {
    let mut live: BTreeMap<u32, usize> = BTreeMap::new();
    let mut report = RankReport::default();
    for e in &h.events {
        match (e.kind, e.op, e.result) {
            (EventKind::Invoke, OpKind::Insert(k), _) => {
                *live.entry(k).or_insert(0) += 1;
            }
            (EventKind::Respond, OpKind::DeleteMin, Some(OpResult::Item(k))) => {
                let below: usize = live.range(..k).map(|(_, &n)| n).sum();
                let rank = below + 1;
                report.ranks.push(rank);
                report.max_rank = report.max_rank.max(rank);
                if rank > bound {
                    report.violations += 1;
                }
                match live.get_mut(&k) {
                    Some(n) if *n > 1 => *n -= 1,
                    Some(_) => {
                        live.remove(&k);
                    }
                    None => {
                        // A popped key that was never inserted: count it
                        // as an out-of-band violation.
                        report.violations += 1;
                    }
                }
            }
            (EventKind::Respond, OpKind::DeleteMin, _) => report.empties += 1,
            _ => {}
        }
    }
    report
}
