//! Deterministic fork-join over independent work items.
//!
//! `par_map` fans a vector of items over scoped worker threads and writes
//! each result into the slot matching its input position, so the assembled
//! output is identical — bit for bit — no matter how many threads ran.
//! Reductions over the results must likewise run in slot order; every
//! caller in this crate reduces serially after the join.
//!
//! The worker count comes from the `SUPERDIR_THREADS` environment variable
//! when it holds a positive integer, otherwise from the machine's available
//! parallelism, and is always clamped to the item count.

use std::thread;

/// Worker count for `items` independent work units.
pub fn num_threads(items: usize) -> usize {
    let machine = thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("SUPERDIR_THREADS")
        .ok()
        .and_then(|v| parse_thread_cap(&v))
        .unwrap_or(machine);
    cap.clamp(1, items.max(1))
}

/// Positive integer out of an environment override; anything else is
/// ignored so a stray value falls back to machine parallelism.
pub fn parse_thread_cap(raw: &str) -> Option<usize> {
    raw.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Map `f` over `items`, preserving input order in the output.
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let threads = num_threads(items.len());
    par_map_with(threads, items, f)
}

/// `par_map` with an explicit worker count.
pub fn par_map_with<T, U, F>(threads: usize, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let n = items.len();
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 || n <= 1 {
        return items.into_iter().map(f).collect();
    }

    let mut input: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut output: Vec<Option<U>> = Vec::with_capacity(n);
    output.resize_with(n, || None);
    let chunk = (n + threads - 1) / threads;

    thread::scope(|scope| {
        let f = &f;
        for (slots, part) in output.chunks_mut(chunk).zip(input.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (slot, item) in slots.iter_mut().zip(part.iter_mut()) {
                    let item = item.take().expect("each input is consumed exactly once");
                    *slot = Some(f(item));
                }
            });
        }
    });

    output.into_iter().map(|o| o.expect("every slot is filled by its worker")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A float workload whose result depends on the input in a nontrivial
    /// way, so reordering or cross-talk between slots would show up.
    fn churn(x: u64) -> f64 {
        let mut acc = x as f64 + 0.5;
        for k in 1..200u64 {
            acc = (acc.abs() + (k as f64).sin()).sqrt() + x as f64 / (k as f64 + 1.0);
        }
        acc
    }

    #[test]
    fn results_come_back_in_input_order() {
        let items: Vec<u64> = (0..97).collect();
        let out = par_map_with(5, items.clone(), |x| x * 3 + 1);
        let expect: Vec<u64> = items.iter().map(|x| x * 3 + 1).collect();
        assert_eq!(out, expect, "slot i must hold f(items[i])");
    }

    #[test]
    fn thread_count_never_changes_the_bits() {
        let items: Vec<u64> = (0..64).collect();
        let serial = par_map_with(1, items.clone(), churn);
        for threads in [2, 3, 7, 64] {
            let parallel = par_map_with(threads, items.clone(), churn);
            for (i, (a, b)) in serial.iter().zip(&parallel).enumerate() {
                assert_eq!(
                    a.to_bits(),
                    b.to_bits(),
                    "item {i} differs between 1 and {threads} threads"
                );
            }
        }
    }

    #[test]
    fn degenerate_inputs_are_handled() {
        let empty: Vec<u64> = Vec::new();
        assert!(par_map_with(4, empty, churn).is_empty());
        assert_eq!(par_map_with(4, vec![3u64], |x| x + 1), vec![4]);
        // more threads than items degrades gracefully
        assert_eq!(par_map_with(16, vec![1u64, 2], |x| x * 2), vec![2, 4]);
    }

    #[test]
    fn thread_cap_parsing_accepts_only_positive_integers() {
        assert_eq!(parse_thread_cap("4"), Some(4));
        assert_eq!(parse_thread_cap(" 2 "), Some(2), "surrounding whitespace is fine");
        assert_eq!(parse_thread_cap("0"), None, "zero threads is meaningless");
        assert_eq!(parse_thread_cap("-1"), None);
        assert_eq!(parse_thread_cap("many"), None);
        assert_eq!(parse_thread_cap(""), None);
    }

    #[test]
    fn num_threads_stays_within_the_item_count() {
        assert!(num_threads(1) == 1, "one item never needs more than one worker");
        assert!(num_threads(0) == 1, "zero items still reports a sane worker count");
        assert!(num_threads(1_000_000) >= 1);
    }
}
