//! Index-parallel maps with a sequential fallback.
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! without it, or through the `_sequential` variants, it runs in order on the
//! calling thread. Results are always returned in index order.

use crate::Result;

/// `f(0), f(1), ..., f(n - 1)`, in parallel when the feature is enabled.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(n, f)
    }
}

pub fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Fallible version of [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

pub fn try_map_indexed_sequential<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(f).collect()
}

/// Whether this build spreads work over threads.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
