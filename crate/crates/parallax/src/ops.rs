//! Thread-local arithmetic-operation counters.
//!
//! The matchers record how many numerator multiplies, additions and absolute
//! differences they perform, so tests can check the per-shift cost claims
//! (block^2 for full-block variants, block for the diagonal variant) against
//! the closed-form accounting in [`crate::metrics::op_count`].
//!
//! Counters are per-thread: to capture a complete run, execute the matcher
//! with `parallel = false` on the measuring thread, bracketed by [`reset`] and
//! [`snapshot`]. Parallel runs spread work (and counts) across pool threads.

use std::cell::Cell;

thread_local! {
    static MULTIPLIES: Cell<u64> = const { Cell::new(0) };
    static ADDS: Cell<u64> = const { Cell::new(0) };
    static ABS_DIFFS: Cell<u64> = const { Cell::new(0) };
}

/// Operation totals, by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub multiplies: u64,
    pub adds: u64,
    pub abs_diffs: u64,
}

/// Zeroes the calling thread's counters.
pub fn reset() {
    MULTIPLIES.with(|c| c.set(0));
    ADDS.with(|c| c.set(0));
    ABS_DIFFS.with(|c| c.set(0));
}

/// Reads the calling thread's counters.
pub fn snapshot() -> OpCounts {
    OpCounts {
        multiplies: MULTIPLIES.with(|c| c.get()),
        adds: ADDS.with(|c| c.get()),
        abs_diffs: ABS_DIFFS.with(|c| c.get()),
    }
}

#[inline]
pub(crate) fn record_multiplies(n: u64) {
    MULTIPLIES.with(|c| c.set(c.get() + n));
}

#[inline]
pub(crate) fn record_adds(n: u64) {
    ADDS.with(|c| c.set(c.get() + n));
}

#[inline]
pub(crate) fn record_abs_diffs(n: u64) {
    ABS_DIFFS.with(|c| c.set(c.get() + n));
}
