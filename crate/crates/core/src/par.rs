//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the work is spread over the rayon pool unless
//! sequential execution has been forced at runtime (used by the benches and
//! by `--threads 1`). Without the feature everything runs on the caller's
//! thread. Results are always returned in index order, so both paths produce
//! bitwise-identical output.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces (or releases) sequential execution process-wide.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps over a slice, possibly in parallel.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_range(items.len(), |i| f(&items[i]))
}

/// Applies a `--threads` style request: `1` forces sequential execution,
/// larger values size the global rayon pool, `0` keeps the default.
pub fn configure_threads(n: usize) -> crate::Result<()> {
    force_sequential(n == 1);
    #[cfg(feature = "parallel")]
    if n > 1 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| crate::Error::InvalidParam {
            name: "threads",
            detail: e.to_string(),
        })?;
    }
    Ok(())
}
