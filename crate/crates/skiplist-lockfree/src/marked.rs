//! Atomically updatable words packing a node link and a deletion mark.
//!
//! Node pointers are at least 2-byte aligned, so the low bit of the
//! pointer word is free to carry the mark. Once a word's mark goes
//! 0 -> 1 it never reverts, and the link half of a marked word is never
//! rewritten (predecessors unlink the node instead).

use std::marker::PhantomData;
use std::sync::atomic::{AtomicUsize, Ordering::SeqCst};

const MARK: usize = 1;

/// A `(link, mark)` pair updated as one atomic word.
pub struct MarkedWord<T> {
    word: AtomicUsize,
    _marker: PhantomData<*mut T>,
}

unsafe impl<T> Send for MarkedWord<T> {}
unsafe impl<T> Sync for MarkedWord<T> {}

impl<T> MarkedWord<T> {
    pub fn new(ptr: *mut T, marked: bool) -> Self {
        MarkedWord {
            word: AtomicUsize::new(pack(ptr, marked)),
            _marker: PhantomData,
        }
    }

    pub fn null() -> Self {
        Self::new(std::ptr::null_mut(), false)
    }

    #[inline]
    pub fn load(&self) -> (*mut T, bool) {
        unpack(self.word.load(SeqCst))
    }

    /// Plain store; only valid before the owning node is published.
    #[inline]
    pub fn store(&self, ptr: *mut T, marked: bool) {
        self.word.store(pack(ptr, marked), SeqCst);
    }

    /// Single compare-and-swap over the packed word.
    #[inline]
    pub fn compare_exchange(
        &self,
        current: (*mut T, bool),
        new: (*mut T, bool),
    ) -> Result<(), (*mut T, bool)> {
        self.word
            .compare_exchange(pack(current.0, current.1), pack(new.0, new.1), SeqCst, SeqCst)
            .map(|_| ())
            .map_err(unpack)
    }

    /// Atomically sets the mark, returning the prior `(link, mark)`.
    #[inline]
    pub fn fetch_or_mark(&self) -> (*mut T, bool) {
        unpack(self.word.fetch_or(MARK, SeqCst))
    }
}

#[inline]
fn pack<T>(ptr: *mut T, marked: bool) -> usize {
    let raw = ptr as usize;
    debug_assert_eq!(raw & MARK, 0, "node pointers must be aligned");
    raw | usize::from(marked)
}

#[inline]
fn unpack<T>(word: usize) -> (*mut T, bool) {
    ((word & !MARK) as *mut T, word & MARK != 0)
}
