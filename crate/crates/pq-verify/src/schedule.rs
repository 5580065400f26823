//! Deterministic interleaving harness.
//!
//! Queues expose named yield points (`pq_core::yieldpoint`); a schedule
//! script is an ordered list of `(thread, point)` grants. Each harness
//! thread blocks at a named point until the script's cursor reaches a
//! matching grant, giving fully reproducible interleavings of the
//! marked steps. A thread passes un-granted points freely when the
//! script holds no future grant for them, and everything runs free once
//! the script is exhausted. A grant whose point is never reached parks
//! the schedule and is reported as a desync.

use std::sync::atomic::{AtomicBool, Ordering::SeqCst};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use pq_core::yieldpoint::{clear_controller, install_controller, YieldController};

/// How long a blocked thread waits before declaring the script stuck.
const DESYNC_TIMEOUT: Duration = Duration::from_secs(10);

/// Ordered grants: thread name, yield-point name.
#[derive(Debug, Clone, Default)]
pub struct Script {
    pub steps: Vec<(String, String)>,
}

impl Script {
    pub fn new<T: Into<String>, P: Into<String>>(steps: Vec<(T, P)>) -> Self {
        Script {
            steps: steps
                .into_iter()
                .map(|(t, p)| (t.into(), p.into()))
                .collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule desync: {0}")]
    ScriptDesync(String),
    #[error("harness thread panicked: {0}")]
    ThreadPanic(String),
}

struct ScriptState {
    pos: usize,
    desynced: Option<String>,
}

struct ScriptController {
    script: Vec<(String, String)>,
    state: Mutex<ScriptState>,
    cv: Condvar,
    failed: AtomicBool,
}

impl ScriptController {
    fn reached(&self, me: &str, point: &str) {
        let mut state = self.state.lock().unwrap();
        loop {
            if self.failed.load(SeqCst) || state.pos >= self.script.len() {
                return;
            }
            let (t, p) = &self.script[state.pos];
            if t == me && p == point {
                state.pos += 1;
                self.cv.notify_all();
                return;
            }
            // Pass through when no future grant names this point for us.
            if !self.script[state.pos..]
                .iter()
                .any(|(t, p)| t == me && p == point)
            {
                return;
            }
            let (next, timeout) = self
                .cv
                .wait_timeout(state, DESYNC_TIMEOUT)
                .unwrap();
            state = next;
            if timeout.timed_out() {
                let msg = format!(
                    "thread {me:?} stuck at point {point:?}; script position {} expects {:?}",
                    state.pos, self.script[state.pos]
                );
                state.desynced = Some(msg.clone());
                self.failed.store(true, SeqCst);
                self.cv.notify_all();
                return;
            }
        }
    }
}

struct ThreadBinding {
    controller: Arc<ScriptController>,
    name: String,
}

impl YieldController for ThreadBinding {
    fn reached(&self, point: &str) {
        self.controller.reached(&self.name, point);
    }
}

/// Runs one closure per named thread under `script`, returning their
/// results in input order.
pub fn run_scripted<R, F>(script: Script, threads: Vec<(&str, F)>) -> Result<Vec<R>, ScheduleError>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    let controller = Arc::new(ScriptController {
        script: script.steps,
        state: Mutex::new(ScriptState {
            pos: 0,
            desynced: None,
        }),
        cv: Condvar::new(),
        failed: AtomicBool::new(false),
    });
    let results: Vec<std::thread::Result<R>> = std::thread::scope(|s| {
        threads
            .into_iter()
            .map(|(name, body)| {
                let binding = Arc::new(ThreadBinding {
                    controller: Arc::clone(&controller),
                    name: name.to_string(),
                });
                s.spawn(move || {
                    install_controller(binding);
                    let out = body();
                    clear_controller();
                    out
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|h| h.join())
            .collect()
    });
    let state = controller.state.lock().unwrap();
    if let Some(msg) = &state.desynced {
        return Err(ScheduleError::ScriptDesync(msg.clone()));
    }
    if state.pos < controller.script.len() {
        return Err(ScheduleError::ScriptDesync(format!(
            "script ended at position {} of {}: grant {:?} never reached",
            state.pos,
            controller.script.len(),
            controller.script[state.pos]
        )));
    }
    drop(state);
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "unknown panic".into());
                return Err(ScheduleError::ThreadPanic(msg));
            }
        }
    }
    Ok(out)
}
