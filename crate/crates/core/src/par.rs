//! Order-preserving fan-out over independent work items.
//!
//! With the `parallel` feature (default) and more than one thread requested,
//! items are evaluated on a dedicated rayon pool; otherwise sequentially.
//! Results always come back in input order, so output never depends on the
//! thread count.

/// Number of worker threads to use when the caller does not specify one.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Map `f` over `items`, returning results in input order.
///
/// `threads == 0` means [`default_threads`].
pub fn ordered_map<T, U, F>(items: Vec<T>, threads: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    let threads = if threads == 0 { default_threads() } else { threads };
    if threads <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    parallel_map(items, threads, f)
}

#[cfg(feature = "parallel")]
fn parallel_map<T, U, F>(items: Vec<T>, threads: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.into_par_iter().map(&f).collect()),
        // pool creation only fails on resource exhaustion; degrade to serial
        Err(_) => items.into_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, U, F>(items: Vec<T>, _threads: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Fallible variant of [`ordered_map`]; the first error in input order wins.
pub fn try_ordered_map<T, U, E, F>(items: Vec<T>, threads: usize, f: F) -> Result<Vec<U>, E>
where
    T: Send,
    U: Send,
    E: Send,
    F: Fn(T) -> Result<U, E> + Sync + Send,
{
    ordered_map(items, threads, f).into_iter().collect()
}
