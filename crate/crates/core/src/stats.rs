//! Small numeric helpers shared by solvers, tests and the harness.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Least-squares line through `(x, y)` points; returns `(slope, r²)`.
///
/// With fewer than two distinct `x` values the slope is `NaN`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

/// Independent deterministic random stream `stream` derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform subset of `0..n` of size `amount`, drawn without replacement.
/// When `amount == n` the full range is returned without consuming randomness.
pub fn sample_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, amount: usize) -> Vec<usize> {
    let amount = amount.min(n);
    if amount == n {
        return (0..n).collect();
    }
    index::sample(rng, n, amount).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let (slope, r2) = linear_fit(&pts);
        assert!((slope + 0.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn subsets_are_distinct_and_in_range() {
        let mut rng = rng_stream(1, 0);
        let s = sample_subset(&mut rng, 100, 30);
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 30);
        assert!(s.iter().all(|&i| i < 100));
        assert_eq!(sample_subset(&mut rng, 5, 9), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = rng_stream(7, 0).random();
        let b: u64 = rng_stream(7, 1).random();
        let c: u64 = rng_stream(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
