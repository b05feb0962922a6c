use crate::data::ColMatrix;
use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::rng::Rng;
use crate::robust::{estimate_mom, estimate_mom_moment, EstimatorSpec};

use super::DerivStream;

/// Plug-in quantities for the uniform deviation bounds of the coordinate
/// estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    /// Corruption rate (enters the trimmed-mean bound only).
    pub eta: f64,
    /// Diameter of the parameter set.
    pub diameter: f64,
    /// Centered `(1+α)` moments of the per-sample partial derivatives, one per
    /// coordinate.
    pub moments: Vec<f64>,
    /// Coordinate smoothness constants `L_j`.
    pub lipschitz: Vec<f64>,
    /// `γ·E‖X‖²`.
    pub l_bar: f64,
    /// `E|γ‖X‖² − L̄|^{1+α}`.
    pub m_l: f64,
    /// Standard deviation of `γ‖X‖²`.
    pub sigma_l: f64,
    /// Accuracy factor `C' > 1` of the CH scale estimate.
    pub ch_scale_factor: f64,
}

/// Coverage constant `c_α = 2^{(3+2α)/(1+α)}·3^{(1+3α)/(1+α)}` of the uniform
/// MOM bound.
pub fn mom_constant(alpha: f64) -> f64 {
    2f64.powf((3.0 + 2.0 * alpha) / (1.0 + alpha)) * 3f64.powf((1.0 + 3.0 * alpha) / (1.0 + alpha))
}

/// Per-coordinate deviation levels `ε_j(δ)` for the given estimator.
///
/// The moments are plug-in estimates, so the result is a heuristic diagnostic
/// rather than a guarantee. For the plain mean, which has no uniform bound of
/// this type, a Chebyshev-style level `(M_j·d/δ)^{1/(1+α)}·n^{−α/(1+α)}` is used.
pub fn error_vector_bound(spec: &EstimatorSpec, inputs: &BoundInputs) -> Result<Vec<f64>> {
    let b = inputs;
    if b.n == 0 || !(b.delta > 0.0 && b.delta < 1.0) || !(b.alpha > 0.0 && b.alpha <= 1.0) {
        return Err(Error::domain("bound needs n >= 1, delta in (0, 1) and alpha in (0, 1]"));
    }
    if b.moments.len() != b.lipschitz.len() {
        return Err(Error::domain("moments and lipschitz constants differ in length"));
    }
    let d = b.moments.len() as f64;
    let n = b.n as f64;
    let a = b.alpha;
    let rate = a / (1.0 + a);
    let inv = 1.0 / (1.0 + a);
    let net = |conf: f64, root: f64| (conf / b.delta).ln() + d * (3.0 * b.diameter * root / 2.0).max(1.0).ln();
    let tail = |lj: f64, root: f64| (b.l_bar + lj) / root;
    let out = b
        .moments
        .iter()
        .zip(&b.lipschitz)
        .map(|(&m, &lj)| match spec {
            EstimatorSpec::Mom { .. } => {
                let root = n.powf(rate);
                mom_constant(a) * (m + b.m_l / n.powf(a)).powf(inv) * (net(d, root) / n).powf(rate) + tail(lj, root)
            }
            EstimatorSpec::Tm { .. } => {
                let root = n.powf(rate);
                28.0 * (m + b.m_l / n.powf(a * (1.0 + a))).powf(inv)
                    * (2.0 * b.eta + 3.0 * net(4.0 * d, root) / n).powf(rate)
                    + tail(lj, root)
            }
            EstimatorSpec::Ch { .. } => {
                let root = n.sqrt();
                let sigma_j = m.sqrt();
                4.0 * b.ch_scale_factor * (2.0 * sigma_j + b.sigma_l / root) * (net(4.0 * d, root) / n).sqrt()
                    + tail(lj, root)
            }
            EstimatorSpec::Erm => (m * d / b.delta).powf(inv) * n.powf(-rate) + tail(lj, n.powf(rate)),
        })
        .collect();
    Ok(out)
}

/// Estimates the plug-in quantities of [`BoundInputs`] at `theta` with MOM over
/// `blocks` blocks (`L_j` from the second moment of column `j`).
#[allow(clippy::too_many_arguments)]
pub fn bound_inputs_at(
    x: &ColMatrix,
    y: &[f64],
    loss: Loss,
    theta: &[f64],
    delta: f64,
    alpha: f64,
    eta: f64,
    diameter: f64,
    blocks: usize,
    rng: &mut Rng,
) -> Result<BoundInputs> {
    let gamma = loss.gamma();
    let mut stream = DerivStream::new(x, y, loss, theta)?;
    let k = stream.block_size();
    let mut moments = Vec::with_capacity(x.n_cols() * k);
    let mut lipschitz = Vec::with_capacity(x.n_cols() * k);
    for j in 0..x.n_cols() {
        let sq: Vec<f64> = x.col(j).iter().map(|v| v * v).collect();
        let lj = gamma * estimate_mom(&sq, blocks, rng)?;
        for c in 0..k {
            let samples = stream.samples(j, c).to_vec();
            moments.push(estimate_mom_moment(&samples, alpha, blocks, rng)?);
            lipschitz.push(lj);
        }
    }
    let mut norms = vec![0.0; x.n_rows()];
    for j in 0..x.n_cols() {
        for (s, v) in norms.iter_mut().zip(x.col(j)) {
            *s += gamma * v * v;
        }
    }
    let l_bar = estimate_mom(&norms, blocks, rng)?;
    let m_l = estimate_mom_moment(&norms, alpha, blocks, rng)?;
    let sigma_l = estimate_mom_moment(&norms, 1.0, blocks, rng)?.sqrt();
    Ok(BoundInputs {
        n: x.n_rows(),
        delta,
        alpha,
        eta,
        diameter,
        moments,
        lipschitz,
        l_bar,
        m_l,
        sigma_l,
        ch_scale_factor: 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(n: usize) -> BoundInputs {
        BoundInputs {
            n,
            delta: 0.01,
            alpha: 1.0,
            eta: 0.0,
            diameter: 1.0,
            moments: vec![1.0],
            lipschitz: vec![0.0],
            l_bar: 0.0,
            m_l: 0.0,
            sigma_l: 0.0,
            ch_scale_factor: 2.0,
        }
    }

    #[test]
    fn mom_worked_example() {
        assert!((mom_constant(1.0) - 2f64.powf(2.5) * 9.0).abs() < 1e-12);
        let e = error_vector_bound(&EstimatorSpec::Mom { blocks: 83 }, &inputs(10_000)).unwrap();
        let expect = mom_constant(1.0) * ((100f64.ln() + 150f64.ln()) / 1e4).sqrt();
        assert!((e[0] - expect).abs() < 1e-12);
        assert!((e[0] - 1.5787).abs() < 1e-4, "{}", e[0]);
    }

    #[test]
    fn zero_moments_leave_the_additive_term() {
        let mut b = inputs(400);
        b.moments = vec![0.0, 0.0];
        b.lipschitz = vec![1.0, 3.0];
        b.l_bar = 2.0;
        for spec in [EstimatorSpec::Mom { blocks: 5 }, EstimatorSpec::Tm { trim: 0.1 }, EstimatorSpec::ch(0.01)] {
            let e = error_vector_bound(&spec, &b).unwrap();
            assert!((e[0] - 3.0 / 20.0).abs() < 1e-12, "{spec:?} {e:?}");
            assert!((e[1] - 5.0 / 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mom_bound_decreases_with_n() {
        let spec = EstimatorSpec::Mom { blocks: 5 };
        let mut prev = f64::INFINITY;
        for n in [100, 1000, 10_000, 100_000, 1_000_000] {
            let mut b = inputs(n);
            b.lipschitz = vec![1.0];
            b.l_bar = 1.0;
            b.m_l = 2.0;
            let e = error_vector_bound(&spec, &b).unwrap()[0];
            assert!(e <= prev);
            prev = e;
        }
    }
}
