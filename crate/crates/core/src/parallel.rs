//! Deterministic chunked map-reduce over batches.
//!
//! Work is always split into fixed-size chunks, each chunk is reduced
//! sequentially, and the per-chunk partials are folded in chunk order.
//! The parallel and sequential paths therefore produce bit-identical
//! results; only wall-clock time differs.

/// Number of items reduced per chunk.
pub const CHUNK: usize = 64;

/// Sum of `f(i)` over `0..n` into a vector of length `dim`.
///
/// `f` receives per-chunk scratch state built by `scratch`, the item index,
/// and an accumulator to add into.
pub fn sum_vec<S, I, F>(n: usize, dim: usize, scratch: I, f: F) -> Vec<f64>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &mut [f64]) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        sum_vec_parallel(n, dim, scratch, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sum_vec_sequential(n, dim, scratch, f)
    }
}

/// Sequential reference path of [`sum_vec`].
pub fn sum_vec_sequential<S, I, F>(n: usize, dim: usize, scratch: I, f: F) -> Vec<f64>
where
    I: Fn() -> S,
    F: Fn(&mut S, usize, &mut [f64]),
{
    let mut total = vec![0.0; dim];
    let mut partial = vec![0.0; dim];
    let mut s = scratch();
    for start in (0..n).step_by(CHUNK) {
        partial.iter_mut().for_each(|p| *p = 0.0);
        for i in start..(start + CHUNK).min(n) {
            f(&mut s, i, &mut partial);
        }
        add_into(&mut total, &partial);
    }
    total
}

#[cfg(feature = "parallel")]
pub fn sum_vec_parallel<S, I, F>(n: usize, dim: usize, scratch: I, f: F) -> Vec<f64>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &mut [f64]) + Sync,
{
    use rayon::prelude::*;
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut partial = vec![0.0; dim];
            let mut s = scratch();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(&mut s, i, &mut partial);
            }
            partial
        })
        .collect();
    let mut total = vec![0.0; dim];
    for p in &partials {
        add_into(&mut total, p);
    }
    total
}

/// Sum of scalar `f(i)` over `0..n` with the same chunking as [`sum_vec`].
pub fn sum_scalar<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let n_chunks = n.div_ceil(CHUNK);
        let partials: Vec<f64> = (0..n_chunks)
            .into_par_iter()
            .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum::<f64>())
            .collect();
        partials.iter().fold(0.0, |a, b| a + b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut total = 0.0;
        for start in (0..n).step_by(CHUNK) {
            total += (start..(start + CHUNK).min(n)).map(&f).sum::<f64>();
        }
        total
    }
}

/// Ordered map of `f` over `0..n`.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
