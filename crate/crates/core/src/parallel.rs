//! Optional data parallelism with results that never depend on thread count.
//!
//! `LGNLAB_THREADS` caps the worker pool; `0` selects the sequential
//! reference mode. Every helper collects results in input order and leaves
//! any reduction to the caller, so outputs are bit-identical across modes.

use std::sync::OnceLock;

use rayon::prelude::*;

pub const THREADS_ENV: &str = "LGNLAB_THREADS";

fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => v.trim().parse::<usize>().ok()?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        if threads <= 1 {
            return None;
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
    })
    .as_ref()
}

/// Number of workers in use; 1 means sequential.
pub fn threads() -> usize {
    pool().map_or(1, |p| p.current_num_threads())
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match pool() {
        Some(p) => p.install(|| items.par_iter().map(&f).collect()),
        None => items.iter().map(f).collect(),
    }
}
