//! Data-parallel helpers. With the `parallel` feature (default) the maps run
//! on the ambient rayon pool; without it they fall back to sequential
//! iteration. Both paths collect in input order, so results are identical
//! regardless of thread count.

/// Cap the global worker pool at `n` threads (0 keeps the default). Takes
/// effect only before the pool is first used; later calls are ignored.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) {}

#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

