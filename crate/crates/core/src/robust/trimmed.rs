//! Trimmed (winsorized) mean: the mean of all values clipped to the empirical
//! `ε` and `1 − ε` quantiles.

use super::select::select_unchecked;
use crate::error::{Error, Result};

/// 0-based ranks `(⌊εn⌋, ⌈(1−ε)n⌉ − 1)` of the clipping quantiles.
///
/// The upper rank is computed as `n − 1 − ⌊εn⌋`, which equals `⌈(1−ε)n⌉ − 1`
/// in exact arithmetic and does not suffer from rounding in `(1 − ε)·n`.
pub fn trim_ranks(n: usize, eps: f64) -> Result<(usize, usize)> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::domain(format!("trim must be in [0, 0.5), got {eps}")));
    }
    if n == 0 {
        return Err(Error::domain("trimmed mean of an empty array"));
    }
    let lo = (eps * n as f64).floor() as usize;
    if 2 * lo >= n {
        return Err(Error::domain(format!("trim {eps} removes everything for n = {n}")));
    }
    Ok((lo, n - 1 - lo))
}

pub fn estimate_tm(values: &[f64], eps: f64) -> Result<f64> {
    let mut buf = values.to_vec();
    estimate_tm_in_place(&mut buf, eps)
}

/// Trimmed mean that reorders `values` while selecting the quantiles.
pub fn estimate_tm_in_place(values: &mut [f64], eps: f64) -> Result<f64> {
    let n = values.len();
    let (lo, hi) = trim_ranks(n, eps)?;
    if lo == 0 {
        return Ok(values.iter().sum::<f64>() / n as f64);
    }
    let q_lo = select_unchecked(values, lo);
    // everything at positions > lo is >= q_lo, so the upper rank lives there
    let q_hi = select_unchecked(&mut values[lo..], hi - lo);
    let sum: f64 = values.iter().map(|&v| v.clamp(q_lo, q_hi)).sum();
    Ok(sum / n as f64)
}
