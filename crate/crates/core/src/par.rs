//! Data-parallel loop shapes with a sequential fallback.
//!
//! Every helper here is deterministic regardless of thread count: outputs are
//! written to disjoint slots, reductions are either order-independent (max)
//! or combine per-row partial results in fixed index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` through `f`, collecting results in index order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Mutate equally sized chunks of `data` in parallel; `f(i, chunk)` receives
/// the chunk index.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Maximum of `f(i)` over `0..n`; `-inf` when empty. Floating max is
/// associative and commutative, so the parallel reduction is exact.
pub fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Sum of per-row values `f(row)`, combined in fixed row order so the result
/// is independent of scheduling.
pub fn sum_rows<F>(rows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partials = map_indexed(rows, f);
    crate::util::pairwise_sum(&partials)
}

/// Pairs of per-row 2-vector partial sums, combined in fixed order.
pub fn sum_rows_vec2<F>(rows: usize, f: F) -> crate::util::Vec2
where
    F: Fn(usize) -> crate::util::Vec2 + Sync + Send,
{
    let partials = map_indexed(rows, f);
    let xs: Vec<f64> = partials.iter().map(|v| v.x).collect();
    let ys: Vec<f64> = partials.iter().map(|v| v.y).collect();
    crate::util::Vec2::new(
        crate::util::pairwise_sum(&xs),
        crate::util::pairwise_sum(&ys),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let v = map_indexed(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn max_indexed_matches_sequential() {
        let m = max_indexed(1000, |i| ((i as f64) * 0.37).sin());
        let s = (0..1000)
            .map(|i| ((i as f64) * 0.37).sin())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(m, s);
    }

    #[test]
    fn sum_rows_is_fixed_order() {
        let a = sum_rows(64, |r| 1.0 / (1.0 + r as f64));
        let b = sum_rows(64, |r| 1.0 / (1.0 + r as f64));
        assert_eq!(a, b);
    }
}
