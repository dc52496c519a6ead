//! Ordered fan-out over scoped threads.
//!
//! Work is split into contiguous chunks, one per worker, and results are
//! stitched back in input order, so output never depends on `workers`.

/// Map `f` over `items` with up to `workers` threads, preserving order.
pub fn map_ordered<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<U>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Ordered map over the index range `0..n`.
pub fn map_indices<U, F>(n: usize, workers: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync,
{
    let idx: Vec<usize> = (0..n).collect();
    map_ordered(&idx, workers, |&i| f(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_worker_count() {
        let items: Vec<u64> = (0..1000).collect();
        let one = map_ordered(&items, 1, |x| x * x + 1);
        for w in [2, 3, 7, 16, 5000] {
            assert_eq!(map_ordered(&items, w, |x| x * x + 1), one);
        }
        assert!(map_ordered::<u64, u64, _>(&[], 4, |x| *x).is_empty());
    }
}
