//! Dispatch of element-wise kernels to rayon or a plain loop.
//!
//! Every kernel routed through here writes each output element exactly once
//! from a pure function of the index, so the result is bit-identical whether
//! it runs sequentially or data-parallel. Reductions (norms, inner products,
//! Krylov dot products) never go through this module: they are summed in
//! fixed index order by contract.
//!
//! Parallel execution requires the `parallel` feature, a workload above a
//! small size threshold, and no active [`run_sequential`] scope.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
use std::cell::Cell;

/// Below this many output elements the rayon fork/join overhead dominates.
#[cfg(feature = "parallel")]
const PAR_MIN_LEN: usize = 4096;

#[cfg(feature = "parallel")]
thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with all kernels on the current thread forced to the sequential
/// path, regardless of workload size. Used by the benchmark suite to compare
/// both code paths within a single build.
pub fn run_sequential<R>(f: impl FnOnce() -> R) -> R {
    #[cfg(feature = "parallel")]
    {
        FORCE_SEQUENTIAL.with(|flag| {
            let prev = flag.replace(true);
            let out = f();
            flag.set(prev);
            out
        })
    }
    #[cfg(not(feature = "parallel"))]
    {
        f()
    }
}

#[cfg(feature = "parallel")]
fn parallel_allowed(len: usize) -> bool {
    len >= PAR_MIN_LEN && !FORCE_SEQUENTIAL.with(Cell::get)
}

/// Fills `out[k] = f(k)` for every index.
pub(crate) fn fill<T: Send>(out: &mut [T], f: impl Fn(usize) -> T + Sync) {
    #[cfg(feature = "parallel")]
    if parallel_allowed(out.len()) {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(k, slot)| *slot = f(k));
        return;
    }
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = f(k);
    }
}

/// Fills `out` in contiguous chunks of `chunk` elements; `f(row, slot)`
/// writes chunk `row`. Used for fixed-width sparse row assembly.
pub(crate) fn fill_chunks<T: Send>(
    out: &mut [T],
    chunk: usize,
    f: impl Fn(usize, &mut [T]) + Sync,
) {
    debug_assert_eq!(out.len() % chunk, 0);
    #[cfg(feature = "parallel")]
    if parallel_allowed(out.len()) {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(row, slot)| f(row, slot));
        return;
    }
    for (row, slot) in out.chunks_mut(chunk).enumerate() {
        f(row, slot);
    }
}
