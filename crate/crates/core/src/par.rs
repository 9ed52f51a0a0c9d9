//! Data-parallel map helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over rayon's pool;
//! without it they run serially. Both paths return results in input order,
//! so callers that reduce sequentially produce identical bytes either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over a slice, collecting results in input order.
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
