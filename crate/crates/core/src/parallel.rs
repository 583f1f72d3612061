//! Order-preserving fan-out over scoped threads.
//!
//! Results never depend on the thread count: work items are fixed up front and
//! collected back in their original order.

use std::thread;

/// Applies `f` to every item, using up to `threads` workers.
pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Thread count from the environment, falling back to the available parallelism.
pub fn default_threads() -> usize {
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_for_any_thread_count() {
        let items: Vec<u64> = (0..103).collect();
        let serial = par_map(&items, 1, |x| x * x);
        for threads in [2, 3, 8, 200] {
            assert_eq!(par_map(&items, threads, |x| x * x), serial);
        }
        assert!(par_map(&[] as &[u64], 4, |x| *x).is_empty());
    }
}
