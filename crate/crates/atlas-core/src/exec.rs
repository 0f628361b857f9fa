//! Execution strategy helpers shared by the data-parallel drivers.
//!
//! With the `parallel` feature enabled, [`map_vec`] fans work out over the
//! rayon thread pool; without it the same call degrades to a plain
//! sequential loop. Both paths preserve input order in the returned vector,
//! which is what keeps the higher-level reports deterministic regardless of
//! worker count. [`map_vec_seq`] is always sequential and exists so the
//! bench suite can compare the two paths inside one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order. Parallel when the `parallel`
/// feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_vec<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items`, preserving order. Parallel when the `parallel`
/// feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn map_vec<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    map_vec_seq(items, f)
}

/// Sequential reference path for [`map_vec`].
pub fn map_vec_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
