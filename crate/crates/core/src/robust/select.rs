//! Selection primitives: random permutations, order statistics and medians.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Uniform random permutation of `0..n` (Fisher-Yates).
pub fn fisher_yates_permutation(n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::domain("cannot permute an empty index set"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    shuffle(&mut perm, rng);
    Ok(perm)
}

/// In-place Fisher-Yates shuffle. Shuffling an existing permutation again yields
/// a uniform permutation, so callers can keep one index buffer alive.
pub fn shuffle(indices: &mut [usize], rng: &mut Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

/// `k`-th smallest value (0-based). The slice is partially reordered.
pub fn quickselect(values: &mut [f64], k: usize) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("quickselect on an empty array"));
    }
    if k >= values.len() {
        return Err(Error::domain(format!("rank {k} out of range for {} values", values.len())));
    }
    Ok(select_unchecked(values, k))
}

#[inline]
pub(crate) fn select_unchecked(values: &mut [f64], k: usize) -> f64 {
    *values.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Median of a nonempty slice; the mean of the two middle order statistics when
/// the length is even.
pub fn median(values: &[f64]) -> Result<f64> {
    let mut buf = values.to_vec();
    median_in_place(&mut buf)
}

pub fn median_in_place(values: &mut [f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("median of an empty array"));
    }
    Ok(median_unchecked(values))
}

pub(crate) fn median_unchecked(values: &mut [f64]) -> f64 {
    let n = values.len();
    let upper = select_unchecked(values, n / 2);
    if n % 2 == 1 {
        upper
    } else {
        // after selection, everything left of n/2 is <= upper
        let lower = values[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn sorted(values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn permutation_basics() {
        let mut rng = rng_from_seed(0);
        assert_eq!(fisher_yates_permutation(1, &mut rng).unwrap(), vec![0]);
        let mut p = fisher_yates_permutation(5, &mut rng).unwrap();
        p.sort();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
        assert!(fisher_yates_permutation(0, &mut rng).is_err());
        assert_eq!(
            fisher_yates_permutation(50, &mut rng_from_seed(9)).unwrap(),
            fisher_yates_permutation(50, &mut rng_from_seed(9)).unwrap()
        );
    }

    #[test]
    fn permutations_of_three_are_uniform() {
        let mut counts = std::collections::HashMap::new();
        let trials = 10_000;
        for seed in 0..trials {
            let p = fisher_yates_permutation(3, &mut rng_from_seed(seed)).unwrap();
            *counts.entry(p).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = trials as f64 / 6.0;
        let mut chi2 = 0.0;
        for &c in counts.values() {
            let freq = c as f64 / trials as f64;
            assert!((freq - 1.0 / 6.0).abs() <= 0.02, "frequency {freq}");
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // 5 degrees of freedom, 0.1% critical value
        assert!(chi2 < 20.52, "chi-square {chi2}");
    }

    #[test]
    fn quickselect_examples() {
        assert_eq!(quickselect(&mut [3.0, 1.0, 2.0], 1).unwrap(), 2.0);
        assert_eq!(quickselect(&mut [5.0, 5.0, 5.0], 2).unwrap(), 5.0);
        assert!(quickselect(&mut [], 0).is_err());
        assert!(quickselect(&mut [1.0], 1).is_err());
    }

    #[test]
    fn quickselect_matches_sort_and_keeps_multiset() {
        let mut rng = rng_from_seed(11);
        for _ in 0..200 {
            let n = rng.random_range(1..300);
            let values: Vec<f64> = (0..n).map(|_| (rng.random_range(-50..50) as f64) * 0.5).collect();
            let k = rng.random_range(0..n);
            let mut buf = values.clone();
            let got = quickselect(&mut buf, k).unwrap();
            assert_eq!(got, sorted(&values)[k]);
            assert_eq!(sorted(&buf), sorted(&values));
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(median(&[7.0]).unwrap(), 7.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }
}
