//! Data-parallel loop helpers.
//!
//! With the `parallel` feature the helpers dispatch to rayon; without it they
//! run on the calling thread. Reductions always split their input into fixed
//! chunks of [`REDUCE_CHUNK`] elements and combine the chunk partials left to
//! right, so results are bit-identical across thread counts and across the
//! two builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by every reduction.
pub const REDUCE_CHUNK: usize = 2048;

/// Fills `out[i] = f(i)` for every index.
pub fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    #[cfg(not(feature = "parallel"))]
    out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
}

/// Builds a vector of length `n` with entries `f(i)`.
pub fn map_indexed<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let mut out = vec![0.0; n];
    fill_indexed(&mut out, f);
    out
}

/// Deterministic sum of `f(i)` for `i in 0..n`.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partial = |c: usize| {
        let start = c * REDUCE_CHUNK;
        let end = (start + REDUCE_CHUNK).min(n);
        let mut acc = 0.0;
        for i in start..end {
            acc += f(i);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..chunks).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = (0..chunks).map(partial).collect();
    partials.into_iter().fold(0.0, |a, b| a + b)
}

/// Deterministic `(min, max)` of `f(i)`; `(+inf, -inf)` for `n == 0`.
pub fn min_max_indexed<F>(n: usize, f: F) -> (f64, f64)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partial = |c: usize| {
        let start = c * REDUCE_CHUNK;
        let end = (start + REDUCE_CHUNK).min(n);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in start..end {
            let x = f(i);
            lo = lo.min(x);
            hi = hi.max(x);
        }
        (lo, hi)
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<(f64, f64)> = (0..chunks).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<(f64, f64)> = (0..chunks).map(partial).collect();
    partials
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| {
            (a.min(c), b.max(d))
        })
}

/// Deterministic maximum of `f(i)`; `-inf` for `n == 0`.
pub fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    min_max_indexed(n, f).1
}

/// Runs two closures, concurrently when the `parallel` feature is on.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}

/// Maps `f` over `items`, concurrently when the `parallel` feature is on,
/// preserving order.
pub fn map_items<T, R, F>(items: &[T], f: F) -> Vec<R>
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_chunked_sequential_order() {
        let n = 3 * REDUCE_CHUNK + 17;
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e3;
        let mut expected = 0.0;
        for c in 0..n.div_ceil(REDUCE_CHUNK) {
            let mut acc = 0.0;
            for i in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(n) {
                acc += f(i);
            }
            expected += acc;
        }
        assert_eq!(sum_indexed(n, f).to_bits(), expected.to_bits());
    }

    #[test]
    fn extrema_of_empty_range() {
        assert_eq!(min_max_indexed(0, |_| 1.0), (f64::INFINITY, f64::NEG_INFINITY));
        assert_eq!(min_max_indexed(3, |i| [2.0, -1.0, 5.0][i]), (-1.0, 5.0));
    }

    #[test]
    fn map_items_keeps_order() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(map_items(&v, |x| x * 2), (0..100).map(|x| x * 2).collect::<Vec<_>>());
    }
}
