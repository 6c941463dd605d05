//! Execution-mode control: data-parallel loops with a sequential fallback.
//!
//! Every hot loop in this crate goes through [`map_indexed`] or
//! [`fill_chunks`]. Both write disjoint outputs from read-only inputs, so the
//! parallel and sequential paths produce bit-identical results regardless of
//! thread count or scheduling. Floating-point reductions (mass, momentum,
//! order parameters) are always performed sequentially for the same reason.
//!
//! The `parallel` cargo feature compiles the rayon path in; at runtime
//! [`set_parallel`] / [`set_threads`] select between them. Without the
//! feature the crate is sequential-only.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Enable or disable the rayon path at runtime. No-op without the
/// `parallel` feature.
pub fn set_parallel(on: bool) {
    PARALLEL.store(on && cfg!(feature = "parallel"), Ordering::Relaxed);
}

/// True when loops will run on the rayon pool.
pub fn parallel() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Configure the global rayon pool size. `0` leaves rayon's default.
/// Calling this more than once is allowed; later calls are ignored by rayon.
#[cfg(feature = "parallel")]
pub fn set_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn set_threads(_n: usize) {}

/// `(0..n).map(f)` collected in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fill `out` (viewed as consecutive chunks of `stride` elements) with
/// `f(chunk_index, chunk)`. Chunks are disjoint, so this parallelizes safely.
pub fn fill_chunks<F>(out: &mut [f64], stride: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(stride > 0 && out.len() % stride == 0);
    #[cfg(feature = "parallel")]
    if parallel() {
        out.par_chunks_mut(stride)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk));
        return;
    }
    for (i, chunk) in out.chunks_mut(stride).enumerate() {
        f(i, chunk);
    }
}
