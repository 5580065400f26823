//! Concurrent operation histories and their on-disk format.
//!
//! A history is a totally ordered event log: each operation contributes
//! an invocation and (if it finished) a response, stamped from a global
//! order counter sampled at the operation boundaries.
//!
//! File format: one event per line, space-separated decimal fields in
//! the order `time thread kind op value`:
//!
//! * `kind` is `I` (invoke) or `R` (respond)
//! * `op` is `INS` or `DEL`
//! * `value` is the key for `INS` events, `-` for `DEL` invocations,
//!   and the popped key or `EMPTY` for `DEL` responses.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

/// Operation named at invocation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Insert(u32),
    DeleteMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Invoke,
    Respond,
}

/// Response payload of a `DeleteMin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpResult {
    Item(u32),
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryEvent {
    pub time: u64,
    pub thread: usize,
    pub kind: EventKind,
    pub op: OpKind,
    /// Present only on `DeleteMin` responses.
    pub result: Option<OpResult>,
}

/// Event log sorted by time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<HistoryEvent>,
}

/// One operation extracted from a history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Operation {
    pub thread: usize,
    pub op: OpKind,
    pub invoke: u64,
    /// `None` for operations still pending at the end of the history.
    pub respond: Option<u64>,
    pub result: Option<OpResult>,
}

#[derive(Debug, thiserror::Error)]
pub enum HistoryError {
    #[error("malformed history: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl History {
    pub fn new(mut events: Vec<HistoryEvent>) -> Self {
        events.sort_by_key(|e| e.time);
        History { events }
    }

    /// Pairs invocations with responses, per thread, in time order.
    pub fn operations(&self) -> Result<Vec<Operation>, HistoryError> {
        let mut ops: Vec<Operation> = Vec::new();
        let mut open: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        for e in &self.events {
            match e.kind {
                EventKind::Invoke => {
                    if open.contains_key(&e.thread) {
                        return Err(HistoryError::Malformed(format!(
                            "thread {} invoked twice without responding",
                            e.thread
                        )));
                    }
                    open.insert(e.thread, ops.len());
                    ops.push(Operation {
                        thread: e.thread,
                        op: e.op,
                        invoke: e.time,
                        respond: None,
                        result: None,
                    });
                }
                EventKind::Respond => {
                    let idx = open.remove(&e.thread).ok_or_else(|| {
                        HistoryError::Malformed(format!(
                            "thread {} responded without invocation",
                            e.thread
                        ))
                    })?;
                    if ops[idx].op != e.op {
                        return Err(HistoryError::Malformed(format!(
                            "thread {} responded to a different operation",
                            e.thread
                        )));
                    }
                    ops[idx].respond = Some(e.time);
                    ops[idx].result = e.result;
                }
            }
        }
        Ok(ops)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.events {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, HistoryError> {
        let mut events = Vec::new();
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            events.push(parse_event(line).map_err(|msg| HistoryError::Parse {
                line: lineno + 1,
                msg,
            })?);
        }
        Ok(History::new(events))
    }
}

impl fmt::Display for HistoryEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EventKind::Invoke => "I",
            EventKind::Respond => "R",
        };
        match (self.op, self.kind, self.result) {
            (OpKind::Insert(k), _, _) => {
                write!(f, "{} {} {} INS {}", self.time, self.thread, kind, k)
            }
            (OpKind::DeleteMin, EventKind::Invoke, _) => {
                write!(f, "{} {} {} DEL -", self.time, self.thread, kind)
            }
            (OpKind::DeleteMin, EventKind::Respond, Some(OpResult::Item(k))) => {
                write!(f, "{} {} {} DEL {}", self.time, self.thread, kind, k)
            }
            (OpKind::DeleteMin, EventKind::Respond, _) => {
                write!(f, "{} {} {} DEL EMPTY", self.time, self.thread, kind)
            }
        }
    }
}

fn parse_event(line: &str) -> Result<HistoryEvent, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, got {}", fields.len()));
    }
    let time: u64 = fields[0].parse().map_err(|_| "bad time".to_string())?;
    let thread: usize = fields[1].parse().map_err(|_| "bad thread".to_string())?;
    let kind = match fields[2] {
        "I" => EventKind::Invoke,
        "R" => EventKind::Respond,
        other => return Err(format!("bad kind {other:?}")),
    };
    let (op, result) = match fields[3] {
        "INS" => {
            let key: u32 = fields[4].parse().map_err(|_| "bad key".to_string())?;
            (OpKind::Insert(key), None)
        }
        "DEL" => match (kind, fields[4]) {
            (EventKind::Invoke, "-") => (OpKind::DeleteMin, None),
            (EventKind::Invoke, other) => {
                return Err(format!("DEL invoke value must be '-', got {other:?}"))
            }
            (EventKind::Respond, "EMPTY") => (OpKind::DeleteMin, Some(OpResult::Empty)),
            (EventKind::Respond, key) => (
                OpKind::DeleteMin,
                Some(OpResult::Item(
                    key.parse().map_err(|_| "bad key".to_string())?,
                )),
            ),
        },
        other => return Err(format!("bad op {other:?}")),
    };
    Ok(HistoryEvent {
        time,
        thread,
        kind,
        op,
        result,
    })
}
