//! Per-thread operation counters.
//!
//! Cheap counters bumped by the kernels whose cost scales with the mesh, so tests can check
//! that online paths never touch full-order data.

use std::cell::Cell;

thread_local! {
    static FULL_STATE_OPS: Cell<u64> = const { Cell::new(0) };
    static CELL_RESIDUALS: Cell<u64> = const { Cell::new(0) };
}

/// Snapshot of the counters on the current thread.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Number of full-order (length `d`) vector entries produced or consumed.
    pub full_state_ops: u64,
    /// Number of single-cell residual kernel evaluations.
    pub cell_residuals: u64,
}

impl std::ops::Sub for Counters {
    type Output = Counters;
    fn sub(self, rhs: Counters) -> Counters {
        Counters {
            full_state_ops: self.full_state_ops - rhs.full_state_ops,
            cell_residuals: self.cell_residuals - rhs.cell_residuals,
        }
    }
}

pub fn snapshot() -> Counters {
    Counters {
        full_state_ops: FULL_STATE_OPS.with(Cell::get),
        cell_residuals: CELL_RESIDUALS.with(Cell::get),
    }
}

#[inline]
pub(crate) fn add_full_state_ops(n: usize) {
    FULL_STATE_OPS.with(|c| c.set(c.get() + n as u64));
}

#[inline]
pub(crate) fn add_cell_residuals(n: usize) {
    CELL_RESIDUALS.with(|c| c.set(c.get() + n as u64));
}

/// Runs `f` and returns its result with the counter increments it caused on this thread.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, Counters) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}
