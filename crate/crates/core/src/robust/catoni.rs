//! Catoni-Holland location M-estimator.
//!
//! The location `ζ` solves `Σ ψ((gⁱ − ζ)/s) = 0` with the bounded influence
//! function `ψ(x) = 2·arctan(eˣ) − π/2`. The scale is `s = σ̂·√(n / (2 log(4/δ)))`
//! where `σ̂` solves `Σ χ((gⁱ − ḡ)/σ) = 0` with `χ(u) = u²/(1+u²) − c`. Both are
//! computed with fixed-point iterations.

use std::f64::consts::FRAC_PI_2;

use super::select::median_unchecked;
use crate::error::{Error, Result};

/// `E[Z²/(1+Z²)]` for a standard Gaussian `Z`, so that `E χ(Z) = 0`.
/// Equals `1 − √(π/2)·e^{1/2}·erfc(1/√2)`.
pub const CHI_OFFSET: f64 = 0.344_320_457_581_201_5;

pub const DEFAULT_MAX_ITER: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChEstimate {
    pub value: f64,
    pub scale: f64,
    pub scale_iterations: usize,
    pub location_iterations: usize,
    pub scale_converged: bool,
    pub location_converged: bool,
}

impl ChEstimate {
    pub fn converged(&self) -> bool {
        self.scale_converged && self.location_converged
    }

    fn exact(value: f64) -> Self {
        ChEstimate {
            value,
            scale: 0.0,
            scale_iterations: 0,
            location_iterations: 0,
            scale_converged: true,
            location_converged: true,
        }
    }
}

#[inline]
pub fn psi(x: f64) -> f64 {
    2.0 * x.exp().atan() - FRAC_PI_2
}

#[inline]
pub fn chi(u: f64) -> f64 {
    let u2 = u * u;
    u2 / (1.0 + u2) - CHI_OFFSET
}

pub fn estimate_ch(values: &[f64], delta: f64, max_iter: usize, tol: f64) -> Result<ChEstimate> {
    let mut scratch = Vec::new();
    estimate_ch_with(values, delta, max_iter, tol, &mut scratch)
}

/// Same as [`estimate_ch`]; `scratch` is only touched on the degenerate-scale
/// fallback (median).
pub fn estimate_ch_with(
    values: &[f64],
    delta: f64,
    max_iter: usize,
    tol: f64,
    scratch: &mut Vec<f64>,
) -> Result<ChEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("CH confidence must be in (0, 1), got {delta}")));
    }
    if max_iter == 0 || !(tol > 0.0) {
        return Err(Error::domain("CH needs max_iter >= 1 and tol > 0"));
    }
    let n = values.len();
    if n == 0 {
        return Err(Error::domain("CH estimate of an empty array"));
    }
    let mut sum = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        if !v.is_finite() {
            return Err(Error::domain("CH estimator received a non-finite value"));
        }
        sum += v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        return Ok(ChEstimate::exact(lo));
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / nf;

    // scale: σ ← σ·(1 − χ(0)/n·Σ χ((gⁱ − ḡ)/σ)), with χ(0) = −c
    let mut sigma = var.sqrt();
    let mut scale_converged = false;
    let mut scale_iterations = 0;
    while scale_iterations < max_iter {
        scale_iterations += 1;
        let inv = 1.0 / sigma;
        let total: f64 = values.iter().map(|&v| chi((v - mean) * inv)).sum();
        let next = sigma * (1.0 + CHI_OFFSET * total / nf);
        let change = (next - sigma).abs();
        sigma = next;
        if change <= tol * sigma {
            scale_converged = true;
            break;
        }
    }

    if !(sigma > 1e-12 * (hi - lo)) {
        scratch.clear();
        scratch.extend_from_slice(values);
        return Ok(ChEstimate { scale: 0.0, scale_iterations, ..ChEstimate::exact(median_unchecked(scratch)) });
    }

    let s = sigma * (nf / (2.0 * (4.0 / delta).ln())).sqrt();
    let inv_s = 1.0 / s;
    let step_tol = tol * s.max(1e-12);
    let mut zeta = mean;
    let mut location_converged = false;
    let mut location_iterations = 0;
    while location_iterations < max_iter {
        location_iterations += 1;
        let total: f64 = values.iter().map(|&v| psi((v - zeta) * inv_s)).sum();
        let step = s * total / nf;
        zeta += step;
        if step.abs() <= step_tol {
            location_converged = true;
            break;
        }
    }

    Ok(ChEstimate {
        value: zeta,
        scale: s,
        scale_iterations,
        location_iterations,
        scale_converged,
        location_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    /// Composite Simpson rule for E[Z²/(1+Z²)] on [-12, 12].
    fn chi_offset_by_quadrature() -> f64 {
        let (a, b, m) = (-12.0f64, 12.0f64, 200_000usize);
        let h = (b - a) / m as f64;
        let f = |z: f64| z * z / (1.0 + z * z) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = f(a) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn chi_offset_matches_quadrature() {
        let c = chi_offset_by_quadrature();
        assert!((c - CHI_OFFSET).abs() < 1e-12, "{c}");
    }

    #[test]
    fn psi_is_odd_and_bounded() {
        assert_eq!(psi(0.0), 0.0);
        for &x in &[0.3, 1.0, 5.0, 40.0, 800.0] {
            assert!((psi(x) + psi(-x)).abs() < 1e-12);
            assert!(psi(x) <= FRAC_PI_2);
        }
        assert!((psi(1e-6) - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn constant_and_symmetric_inputs() {
        assert_eq!(estimate_ch(&[5.0; 10], 0.01, 50, 1e-8).unwrap().value, 5.0);
        for m in [-3.0, 0.0, 2.5, 1e4] {
            let est = estimate_ch(&[m - 1.0, m, m + 1.0], 0.01, 50, 1e-8).unwrap();
            assert!((est.value - m).abs() <= 1e-8 * m.abs().max(1.0));
        }
    }

    #[test]
    fn gaussian_sample_close_to_mean() {
        let mut rng = rng_from_seed(2024);
        let values: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = values.iter().sum::<f64>() / 1000.0;
        let est = estimate_ch(&values, 0.01, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert!(est.value.abs() < 0.15);
        assert!((est.value - mean).abs() < 0.02);
        assert!(est.location_converged);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(estimate_ch(&[1.0, f64::NAN], 0.1, 50, 1e-8).is_err());
        assert!(estimate_ch(&[1.0, 2.0], 1.0, 50, 1e-8).is_err());
        assert!(estimate_ch(&[1.0, 2.0], 0.0, 50, 1e-8).is_err());
        assert!(estimate_ch(&[], 0.1, 50, 1e-8).is_err());
    }

    #[test]
    fn nonconvergence_is_flagged() {
        let values: Vec<f64> = (0..100).map(|i| (i as f64).powi(3)).collect();
        let est = estimate_ch(&values, 0.01, 1, 1e-14).unwrap();
        assert!(!est.converged());
        assert!(est.value.is_finite());
    }
}
