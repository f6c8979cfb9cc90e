//! Allocation accounting for storage audits.
//!
//! Register [`CountingAllocator`] as the global allocator of a binary or test
//! target, call [`reset`] with the byte size that counts as "large" (one
//! `n × n` block of `f64`), run the code under audit, then read [`snapshot`].

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering::Relaxed};

pub struct CountingAllocator;

static ACTIVE: AtomicBool = AtomicBool::new(false);
static THRESHOLD: AtomicUsize = AtomicUsize::new(usize::MAX);
static LIVE_BYTES: AtomicUsize = AtomicUsize::new(0);
static PEAK_BYTES: AtomicUsize = AtomicUsize::new(0);
static BASE_BYTES: AtomicUsize = AtomicUsize::new(0);
static MAX_ALLOC: AtomicUsize = AtomicUsize::new(0);
static LARGE_LIVE: AtomicUsize = AtomicUsize::new(0);
static LARGE_PEAK: AtomicUsize = AtomicUsize::new(0);
static LARGE_TOTAL: AtomicUsize = AtomicUsize::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AllocStats {
    /// Largest single allocation since the last reset.
    pub max_allocation_bytes: usize,
    /// Peak live heap above the level at reset.
    pub peak_extra_bytes: usize,
    /// Allocations at or above the threshold since the last reset.
    pub large_allocations: usize,
    /// Most threshold-sized blocks alive at once since the last reset.
    pub peak_large_live: usize,
}

fn on_alloc(size: usize) {
    let live = LIVE_BYTES.fetch_add(size, Relaxed) + size;
    PEAK_BYTES.fetch_max(live, Relaxed);
    MAX_ALLOC.fetch_max(size, Relaxed);
    if size >= THRESHOLD.load(Relaxed) {
        LARGE_TOTAL.fetch_add(1, Relaxed);
        let n = LARGE_LIVE.fetch_add(1, Relaxed) + 1;
        LARGE_PEAK.fetch_max(n, Relaxed);
    }
}

fn on_dealloc(size: usize) {
    LIVE_BYTES.fetch_sub(size, Relaxed);
    if size >= THRESHOLD.load(Relaxed) {
        // Blocks allocated before the threshold was lowered are not tracked.
        let _ = LARGE_LIVE.fetch_update(Relaxed, Relaxed, |v| v.checked_sub(1));
    }
}

// SAFETY: every call is forwarded unchanged to the system allocator.
unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ACTIVE.store(true, Relaxed);
        let p = System.alloc(layout);
        if !p.is_null() {
            on_alloc(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        ACTIVE.store(true, Relaxed);
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            on_alloc(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        on_dealloc(layout.size());
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            on_dealloc(layout.size());
            on_alloc(new_size);
        }
        p
    }
}

/// Whether a [`CountingAllocator`] is installed and has seen traffic.
pub fn is_active() -> bool {
    ACTIVE.load(Relaxed)
}

/// Starts a new measurement window; blocks of `large_threshold` bytes or more count as large.
pub fn reset(large_threshold: usize) {
    THRESHOLD.store(large_threshold.max(1), Relaxed);
    let live = LIVE_BYTES.load(Relaxed);
    BASE_BYTES.store(live, Relaxed);
    PEAK_BYTES.store(live, Relaxed);
    MAX_ALLOC.store(0, Relaxed);
    LARGE_LIVE.store(0, Relaxed);
    LARGE_PEAK.store(0, Relaxed);
    LARGE_TOTAL.store(0, Relaxed);
}

pub fn snapshot() -> AllocStats {
    AllocStats {
        max_allocation_bytes: MAX_ALLOC.load(Relaxed),
        peak_extra_bytes: PEAK_BYTES.load(Relaxed).saturating_sub(BASE_BYTES.load(Relaxed)),
        large_allocations: LARGE_TOTAL.load(Relaxed),
        peak_large_live: LARGE_PEAK.load(Relaxed),
    }
}
