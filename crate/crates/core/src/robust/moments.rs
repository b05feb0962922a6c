//! Hyper-parameters from confidence levels and robust moment estimates built on
//! median-of-means.

use super::mom::{check_blocks, mom_with_permutation};
use super::select::shuffle;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// `K = ⌈18·ln(1/δ)⌉`. The caller clamps to `[1, n]`.
pub fn blocks_from_confidence(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("confidence must be in (0, 1), got {delta}")));
    }
    // the tolerance keeps exact integers such as δ = e⁻¹ from rounding up
    let k = (18.0 * (1.0 / delta).ln() - 1e-9).ceil();
    Ok((k as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimLevel {
    pub eps: f64,
    /// The raw value `8η + 12·ln(4/δ)/n` was at least 1/2 and was clamped to `1/2 − 1/n`.
    pub clamped: bool,
}

/// `ε = 8η + 12·ln(4/δ)/n`, clamped below 1/2.
pub fn tm_eps_from_confidence(delta: f64, eta: f64, n: usize) -> Result<TrimLevel> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("confidence must be in (0, 1), got {delta}")));
    }
    if !(0.0..0.5).contains(&eta) || n == 0 {
        return Err(Error::domain("corruption rate must be in [0, 0.5) and n >= 1"));
    }
    let eps = 8.0 * eta + 12.0 * (4.0 / delta).ln() / n as f64;
    if eps < 0.5 {
        Ok(TrimLevel { eps, clamped: false })
    } else {
        Ok(TrimLevel { eps: (0.5 - 1.0 / n as f64).max(0.0), clamped: true })
    }
}

/// Inflation factor `(1 − 216^{1/(1+α)}·C·(ln(1/δ)/n)^{α/(1+α)})⁻¹` turning a MOM
/// estimate of `E[(Xʲ)²]` into a high-probability upper bound. `None` when the
/// denominator is not positive.
pub fn second_moment_inflation(n: usize, delta: f64, ratio_constant: f64, alpha: f64) -> Option<f64> {
    let a = alpha;
    let term = 216f64.powf(1.0 / (1.0 + a)) * ratio_constant * ((1.0 / delta).ln() / n as f64).powf(a / (1.0 + a));
    let denom = 1.0 - term;
    (denom > 0.0).then(|| 1.0 / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBound {
    pub value: f64,
    /// False when the inflation denominator was not positive; `value` is then the
    /// plain MOM estimate.
    pub bound_valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBoundConfig {
    pub delta: f64,
    /// Moment-ratio constant `C ≥ 1` of the `L^{1+α}`–`L¹` condition.
    pub ratio_constant: f64,
    pub alpha: f64,
}

impl Default for MomentBoundConfig {
    fn default() -> Self {
        MomentBoundConfig { delta: 0.01, ratio_constant: 1.0, alpha: 1.0 }
    }
}

/// High-probability upper bound on `E[V]` from squared features `V = (Xʲ)²`.
pub fn mom_second_moment_upper_bound(
    squares: &[f64],
    blocks: usize,
    config: MomentBoundConfig,
    rng: &mut Rng,
) -> Result<MomentBound> {
    check_config(&config)?;
    let mut perm = Vec::new();
    let mut means = Vec::new();
    second_moment_bound_with(squares, blocks, config, rng, &mut perm, &mut means)
}

pub(crate) fn second_moment_bound_with(
    squares: &[f64],
    blocks: usize,
    config: MomentBoundConfig,
    rng: &mut Rng,
    perm: &mut Vec<usize>,
    means: &mut Vec<f64>,
) -> Result<MomentBound> {
    let n = squares.len();
    check_blocks(n, blocks)?;
    reset_perm(perm, n);
    shuffle(perm, rng);
    let estimate = mom_with_permutation(squares, perm, blocks, means);
    Ok(match second_moment_inflation(n, config.delta, config.ratio_constant, config.alpha) {
        Some(f) => MomentBound { value: f * estimate, bound_valid: true },
        None => MomentBound { value: estimate, bound_valid: false },
    })
}

fn check_config(config: &MomentBoundConfig) -> Result<()> {
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::domain("confidence must be in (0, 1)"));
    }
    if !(config.alpha > 0.0 && config.alpha <= 1.0) || !(config.ratio_constant >= 0.0) {
        return Err(Error::domain("alpha must be in (0, 1] and the ratio constant nonnegative"));
    }
    Ok(())
}

/// Two-step MOM estimate of the centered moment `E|V − E V|^{1+α}`: a MOM
/// location first, then MOM of `|vⁱ − μ̂|^{1+α}` over fresh blocks.
pub fn estimate_mom_moment(values: &[f64], alpha: f64, blocks: usize, rng: &mut Rng) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must be in (0, 1], got {alpha}")));
    }
    let n = values.len();
    check_blocks(n, blocks)?;
    let mut perm = Vec::new();
    let mut means = Vec::new();
    let mut buf = Vec::with_capacity(n);
    Ok(mom_moment_with(values, alpha, blocks, rng, &mut perm, &mut means, &mut buf))
}

pub(crate) fn mom_moment_with(
    values: &[f64],
    alpha: f64,
    blocks: usize,
    rng: &mut Rng,
    perm: &mut Vec<usize>,
    means: &mut Vec<f64>,
    buf: &mut Vec<f64>,
) -> f64 {
    reset_perm(perm, values.len());
    shuffle(perm, rng);
    let center = mom_with_permutation(values, perm, blocks, means);
    let p = 1.0 + alpha;
    buf.clear();
    buf.extend(values.iter().map(|&v| (v - center).abs().powf(p)));
    shuffle(perm, rng);
    mom_with_permutation(buf, perm, blocks, means).max(0.0)
}

pub(crate) fn reset_perm(perm: &mut Vec<usize>, n: usize) {
    if perm.len() != n {
        perm.clear();
        perm.extend(0..n);
    }
}
