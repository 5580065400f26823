//! Named yield points for deterministic interleaving tests.
//!
//! Queue implementations call [`yield_point`] at the steps a schedule
//! may want to interleave. In normal execution the call is a single
//! thread-local read. A test harness installs a [`YieldController`] on
//! the threads it spawns; those threads then block at each named point
//! until the controller's script grants them the step. Threads without
//! a controller (including unrelated tests running in parallel) are
//! never affected.

use std::cell::RefCell;
use std::sync::Arc;

/// Decides when a controlled thread may pass a named yield point.
pub trait YieldController: Send + Sync {
    fn reached(&self, point: &str);
}

thread_local! {
    static CONTROLLER: RefCell<Option<Arc<dyn YieldController>>> = const { RefCell::new(None) };
}

/// Installs `controller` for the current thread.
pub fn install_controller(controller: Arc<dyn YieldController>) {
    CONTROLLER.with(|c| *c.borrow_mut() = Some(controller));
}

/// Removes the current thread's controller.
pub fn clear_controller() {
    CONTROLLER.with(|c| *c.borrow_mut() = None);
}

/// Marks a named step. No-op unless the current thread is controlled.
#[inline]
pub fn yield_point(name: &str) {
    CONTROLLER.with(|c| {
        if let Some(ctrl) = c.borrow().as_ref() {
            ctrl.reached(name);
        }
    });
}
