//! Skip-list nodes with variable-height towers.
//!
//! A node is allocated with exactly `level + 1` successor words. The
//! tower is the trailing field, so allocation sizes the node to its
//! height; field access past `tower[0]` goes through raw pointer
//! arithmetic.
//!
//! Every node carries a canary word. The reclamation poison mode
//! overwrites it instead of freeing the node, and instrumented
//! traversals assert it on every dereference, turning a use-after-
//! reclaim into a deterministic test failure.

use std::alloc::{alloc, dealloc, handle_alloc_error, Layout};
use std::mem;
use std::ptr;
use std::sync::atomic::{AtomicU32, Ordering::Relaxed};

use pq_core::Entry;
use reclaim_epoch::{Deferred, ReclaimMode};

use crate::marked::MarkedWord;
use crate::level::TOWER_SLOTS;

const CANARY_LIVE: u32 = 0xFEED_F00D;
const CANARY_DEAD: u32 = 0xDEAD_BEEF;

/// A skip-list node: key, insertion sequence number, payload, a
/// per-variant extension, and `level + 1` marked successor words.
#[repr(C)]
pub struct Node<E> {
    key: u32,
    canary: AtomicU32,
    seq: u64,
    payload: u64,
    level: u32,
    ext: E,
    tower: [MarkedWord<Node<E>>; 1],
}

impl<E> Node<E> {
    fn layout(level: usize) -> Layout {
        let tower_end =
            mem::offset_of!(Node<E>, tower) + (level + 1) * mem::size_of::<MarkedWord<Node<E>>>();
        let size = tower_end.max(mem::size_of::<Node<E>>());
        Layout::from_size_align(size, mem::align_of::<Node<E>>()).expect("node layout")
    }

    /// Allocates a node of the given level with null successor words.
    pub fn alloc(key: u32, seq: u64, payload: u64, level: usize, ext: E) -> *mut Node<E> {
        assert!(level < TOWER_SLOTS);
        let layout = Self::layout(level);
        unsafe {
            let node = alloc(layout) as *mut Node<E>;
            if node.is_null() {
                handle_alloc_error(layout);
            }
            ptr::write(&raw mut (*node).key, key);
            ptr::write(&raw mut (*node).canary, AtomicU32::new(CANARY_LIVE));
            ptr::write(&raw mut (*node).seq, seq);
            ptr::write(&raw mut (*node).payload, payload);
            ptr::write(&raw mut (*node).level, level as u32);
            ptr::write(&raw mut (*node).ext, ext);
            let tower = &raw mut (*node).tower as *mut MarkedWord<Node<E>>;
            for i in 0..=level {
                ptr::write(tower.add(i), MarkedWord::null());
            }
            node
        }
    }

    /// Drops the extension and frees the node's memory.
    ///
    /// # Safety
    /// `node` must be unreachable and not referenced by any thread.
    pub unsafe fn finalize(node: *mut Node<E>) {
        unsafe {
            let level = (*node).level as usize;
            ptr::drop_in_place(&raw mut (*node).ext);
            dealloc(node as *mut u8, Self::layout(level));
        }
    }

    /// Deferred-destruction handle for the epoch reclaimer. In poison
    /// mode the node is marked dead and leaked rather than freed.
    pub fn deferred(node: *mut Node<E>) -> Deferred {
        unsafe fn run<E>(ptr: *mut (), mode: ReclaimMode) {
            let node = ptr as *mut Node<E>;
            match mode {
                ReclaimMode::Free => unsafe { Node::finalize(node) },
                ReclaimMode::PoisonAndLeak => unsafe {
                    (*node).canary.store(CANARY_DEAD, Relaxed);
                },
            }
        }
        unsafe { Deferred::new(node as *mut (), run::<E>) }
    }

    #[inline]
    pub fn key(&self) -> u32 {
        self.key
    }

    #[inline]
    pub fn seq(&self) -> u64 {
        self.seq
    }

    #[inline]
    pub fn payload(&self) -> u64 {
        self.payload
    }

    #[inline]
    pub fn entry(&self) -> Entry {
        Entry::new(self.key, self.payload)
    }

    /// Ordering coordinates: lists are sorted by `(key, seq)`.
    #[inline]
    pub fn rank(&self) -> (u32, u64) {
        (self.key, self.seq)
    }

    /// Top tower level of this node.
    #[inline]
    pub fn level(&self) -> usize {
        self.level as usize
    }

    #[inline]
    pub fn ext(&self) -> &E {
        &self.ext
    }

    /// The marked successor word for `level`.
    ///
    /// # Safety
    /// `level <= self.level()`.
    #[inline]
    pub unsafe fn succ(&self, level: usize) -> &MarkedWord<Node<E>> {
        debug_assert!(level <= self.level as usize);
        unsafe { &*(&raw const self.tower as *const MarkedWord<Node<E>>).add(level) }
    }

    /// Fails the test run when a reclaimed node is dereferenced
    /// (active in debug builds; poison mode keeps the memory mapped).
    #[inline]
    pub fn assert_live(&self) {
        debug_assert_eq!(
            self.canary.load(Relaxed),
            CANARY_LIVE,
            "node accessed after reclamation (key {})",
            self.key
        );
    }

    /// Sets the deletion mark on every level of the tower, top-down.
    /// Returns `true` iff this call won the level-0 transition.
    pub fn mark_tower(&self) -> bool {
        for l in (0..=self.level as usize).rev() {
            let (_, was_marked) = unsafe { self.succ(l) }.fetch_or_mark();
            if l == 0 {
                return !was_marked;
            }
        }
        unreachable!()
    }
}
