//! Replicate fan-out. With the `parallel` feature the work runs on rayon,
//! otherwise sequentially; results are always returned in index order, so
//! aggregates do not depend on scheduling.

/// Evaluates `f(i)` for `i in 0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] but always sequential; used by benches as the baseline.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `f` on a dedicated pool of `workers` threads (`0` = rayon default).
/// Without the `parallel` feature `f` simply runs on the caller's thread.
#[cfg(feature = "parallel")]
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {workers}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R, F>(_workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    f()
}
