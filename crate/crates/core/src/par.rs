//! Data-parallel helpers with a sequential fallback.
//!
//! Every parallel loop in this crate maps independent indices to disjoint
//! output slots and reduces sequentially afterwards, so results are
//! bit-identical regardless of thread count or whether the `parallel`
//! feature is enabled at all.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` through `f`, preserving index order in the output.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Map a slice through `f`, preserving order.
pub(crate) fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
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
