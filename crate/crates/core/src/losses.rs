//! Convex losses for linear prediction.
//!
//! Every loss is a function `ℓ(z, y)` of the linear score `z = xᵀθ` and the label
//! `y`, with a derivative in `z` that is `γ`-Lipschitz (except [`Loss::Lad`],
//! whose "derivative" is the subgradient `sign(z − y)`). The growth constants of
//! the loss (`|ℓ(z, y)| ≤ C₁ + C₂|z − y|^q` and the analogue for `ℓ'`) only matter
//! for the theory and are not stored; the degree `q` is exposed by [`Loss::q`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HUBER_TAU: f64 = 1.35;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    /// `(z − y)² / 2`
    Square,
    /// Huber function of the residual `z − y` with threshold `tau`.
    Huber { tau: f64 },
    /// `log(1 + e^{−yz})` with `y ∈ {−1, +1}`.
    Logistic,
    /// Softmax cross-entropy over `k` classes; labels are class indices.
    MulticlassLogistic { k: usize },
    /// `|z − y|`. Not smooth; used as a baseline only.
    Lad,
}

impl Loss {
    pub fn huber(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("huber tau must be positive, got {tau}")));
        }
        Ok(Loss::Huber { tau })
    }

    pub fn multiclass(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("multiclass loss needs k >= 2, got {k}")));
        }
        Ok(Loss::MulticlassLogistic { k })
    }

    /// Smoothness constant of `z ↦ ℓ'(z, y)`.
    ///
    /// For the multiclass loss this is the Lipschitz constant of the block
    /// gradient (largest eigenvalue of `diag(p) − ppᵀ` is at most 1/2). For LAD,
    /// which has no such constant, 1 is returned so step sizes stay defined.
    pub fn gamma(&self) -> f64 {
        match self {
            Loss::Square | Loss::Huber { .. } | Loss::Lad => 1.0,
            Loss::Logistic => 0.25,
            Loss::MulticlassLogistic { .. } => 0.5,
        }
    }

    /// Asymptotic polynomial degree.
    pub fn q(&self) -> f64 {
        match self {
            Loss::Square => 2.0,
            _ => 1.0,
        }
    }

    /// Number of scores per sample (1 except for the multiclass loss).
    pub fn n_outputs(&self) -> usize {
        match self {
            Loss::MulticlassLogistic { k } => *k,
            _ => 1,
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, Loss::Lad)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::Square => "square",
            Loss::Huber { .. } => "huber",
            Loss::Logistic => "logistic",
            Loss::MulticlassLogistic { .. } => "multiclass_logistic",
            Loss::Lad => "lad",
        }
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        let ok = match self {
            Loss::Square | Loss::Huber { .. } | Loss::Lad => y.is_finite(),
            Loss::Logistic => y == 1.0 || y == -1.0,
            Loss::MulticlassLogistic { k } => {
                y >= 0.0 && y.fract() == 0.0 && (y as usize) < *k
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("label {y} is outside the domain of the {} loss", self.name())))
        }
    }

    /// `ℓ(z, y)` for scalar losses.
    pub fn value(&self, z: f64, y: f64) -> Result<f64> {
        self.check_scalar()?;
        self.check_label(y)?;
        Ok(self.value_unchecked(z, y))
    }

    /// `∂ℓ(z, y)/∂z` for scalar losses.
    pub fn derivative(&self, z: f64, y: f64) -> Result<f64> {
        self.check_scalar()?;
        self.check_label(y)?;
        Ok(self.derivative_unchecked(z, y))
    }

    /// Same as [`Loss::value`] without label validation. The caller guarantees the
    /// label is in the domain and the loss is scalar.
    #[inline]
    pub fn value_unchecked(&self, z: f64, y: f64) -> f64 {
        match *self {
            Loss::Square => 0.5 * (z - y) * (z - y),
            Loss::Huber { tau } => {
                let u = (z - y).abs();
                if u <= tau {
                    0.5 * u * u
                } else {
                    tau * (u - 0.5 * tau)
                }
            }
            Loss::Logistic => softplus(-y * z),
            Loss::Lad => (z - y).abs(),
            Loss::MulticlassLogistic { .. } => f64::NAN,
        }
    }

    #[inline]
    pub fn derivative_unchecked(&self, z: f64, y: f64) -> f64 {
        match *self {
            Loss::Square => z - y,
            Loss::Huber { tau } => (z - y).clamp(-tau, tau),
            Loss::Logistic => -y * sigmoid(-y * z),
            Loss::Lad => {
                let u = z - y;
                if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::MulticlassLogistic { .. } => f64::NAN,
        }
    }

    /// Cross-entropy of `softmax(scores)` against class `y`, and its gradient
    /// `softmax(scores) − onehot(y)`.
    pub fn multiclass_scores_and_grad(&self, scores: &[f64], y: usize) -> Result<(f64, Vec<f64>)> {
        let Loss::MulticlassLogistic { k } = *self else {
            return Err(Error::domain("multiclass_scores_and_grad needs the multiclass loss"));
        };
        if scores.len() != k {
            return Err(Error::domain(format!("expected {k} scores, got {}", scores.len())));
        }
        if y >= k {
            return Err(Error::domain(format!("class {y} out of range for k = {k}")));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("scores must be finite"));
        }
        let mut grad = vec![0.0; k];
        let value = softmax_xent_into(scores, y, &mut grad);
        Ok((value, grad))
    }

    fn check_scalar(&self) -> Result<()> {
        if let Loss::MulticlassLogistic { .. } = self {
            Err(Error::domain("use multiclass_scores_and_grad for the multiclass loss"))
        } else {
            Ok(())
        }
    }
}

/// Writes `softmax(scores) − onehot(y)` into `grad` and returns the cross-entropy.
#[inline]
pub(crate) fn softmax_xent_into(scores: &[f64], y: usize, grad: &mut [f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (g, &s) in grad.iter_mut().zip(scores) {
        *g = (s - max).exp();
        total += *g;
    }
    for g in grad.iter_mut() {
        *g /= total;
    }
    // log-sum-exp minus the true class score; the 1 − p_y form keeps precision
    // when p_y is close to one.
    let others: f64 = grad.iter().enumerate().filter(|&(c, _)| c != y).map(|(_, p)| p).sum();
    if others < 0.5 {
        grad[y] = -others;
        -(-others).ln_1p()
    } else {
        grad[y] -= 1.0;
        max + total.ln() - scores[y]
    }
}

/// `log(1 + e^t)` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1 / (1 + e^{−t})` without overflow.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    const LN2: f64 = std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(Loss::Square.value(0.0, 2.0).unwrap(), 2.0);
        assert!(close(Loss::Logistic.value(0.0, 1.0).unwrap(), LN2, 1e-15));
        assert!(close(Loss::Huber { tau: 1.0 }.value(3.0, 0.0).unwrap(), 2.5, 1e-15));
        assert_eq!(Loss::Lad.value(1.0, 3.5).unwrap(), 2.5);
    }

    #[test]
    fn pointwise_derivatives() {
        assert_eq!(Loss::Square.derivative(1.0, 3.0).unwrap(), -2.0);
        assert!(close(Loss::Logistic.derivative(0.0, 1.0).unwrap(), -0.5, 1e-15));
        assert_eq!(Loss::Huber { tau: 1.0 }.derivative(3.0, 0.0).unwrap(), 1.0);
        assert_eq!(Loss::Lad.derivative(-1.0, 0.0).unwrap(), -1.0);
    }

    #[test]
    fn smoothness_constants() {
        assert_eq!((Loss::Square.gamma(), Loss::Square.q()), (1.0, 2.0));
        assert_eq!((Loss::Huber { tau: 2.0 }.gamma(), Loss::Huber { tau: 2.0 }.q()), (1.0, 1.0));
        assert_eq!((Loss::Logistic.gamma(), Loss::Logistic.q()), (0.25, 1.0));
    }

    #[test]
    fn logistic_is_stable_for_huge_scores() {
        for &z in &[1e8, -1e8, 750.0, -750.0] {
            for &y in &[1.0, -1.0] {
                let v = Loss::Logistic.value(z, y).unwrap();
                let d = Loss::Logistic.derivative(z, y).unwrap();
                assert!(v.is_finite() && v >= 0.0, "value({z},{y}) = {v}");
                assert!(d.is_finite() && d.abs() <= 1.0);
            }
        }
        assert!(close(Loss::Logistic.value(-1e8, 1.0).unwrap(), 1e8, 1e-6));
        assert_eq!(Loss::Logistic.value(1e8, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn label_domain_errors() {
        assert!(matches!(Loss::Logistic.value(0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(Loss::Logistic.derivative(0.0, 2.0), Err(Error::Domain(_))));
        assert!(Loss::Square.value(0.0, f64::NAN).is_err());
        assert!(Loss::huber(0.0).is_err());
        assert!(Loss::multiclass(1).is_err());
    }

    #[test]
    fn multiclass_examples() {
        let two = Loss::MulticlassLogistic { k: 2 };
        let (v, g) = two.multiclass_scores_and_grad(&[0.0, 0.0], 0).unwrap();
        assert!(close(v, LN2, 1e-15));
        assert!(close(g[0], -0.5, 1e-15) && close(g[1], 0.5, 1e-15));

        let three = Loss::MulticlassLogistic { k: 3 };
        let (v, g) = three.multiclass_scores_and_grad(&[0.0, 0.0, 0.0], 2).unwrap();
        assert!(close(v, 3f64.ln(), 1e-15));
        assert!(close(g[0], 1.0 / 3.0, 1e-15) && close(g[2], -2.0 / 3.0, 1e-15));

        // log(1 + e^{-20}) = 2.061153620314381e-9 (mpmath, 30 digits)
        let (v, g) = two.multiclass_scores_and_grad(&[10.0, -10.0], 0).unwrap();
        assert!(close(v, 2.061153620314381e-9, 1e-20), "{v}");
        assert!(close(g[0], -2.0611536181902037e-9, 1e-20));
        assert!(close(g[1], 2.0611536181902037e-9, 1e-20));

        assert!(three.multiclass_scores_and_grad(&[0.0; 3], 3).is_err());
        assert!(Loss::Square.multiclass_scores_and_grad(&[0.0], 0).is_err());
    }

    fn smooth_losses() -> Vec<Loss> {
        vec![Loss::Square, Loss::Huber { tau: 1.35 }, Loss::Huber { tau: 0.3 }, Loss::Logistic]
    }

    fn random_label(loss: &Loss, rng: &mut impl rand::Rng) -> f64 {
        match loss {
            Loss::Logistic => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => rng.random_range(-5.0..5.0),
        }
    }

    #[test]
    fn derivative_is_gamma_lipschitz() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for loss in smooth_losses() {
            for _ in 0..1000 {
                let y = random_label(&loss, &mut rng);
                let z1 = rng.random_range(-10.0..10.0);
                let z2 = rng.random_range(-10.0..10.0);
                let lhs = (loss.derivative(z1, y).unwrap() - loss.derivative(z2, y).unwrap()).abs();
                assert!(lhs <= loss.gamma() * (z1 - z2).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let h = 1e-5;
        for loss in smooth_losses() {
            for _ in 0..1000 {
                let y = random_label(&loss, &mut rng);
                let z = rng.random_range(-10.0..10.0);
                if let Loss::Huber { tau } = loss {
                    if ((z - y).abs() - tau).abs() < 2.0 * h {
                        continue;
                    }
                }
                let fd = (loss.value(z + h, y).unwrap() - loss.value(z - h, y).unwrap()) / (2.0 * h);
                assert!((loss.derivative(z, y).unwrap() - fd).abs() <= 1e-6, "{loss:?} z={z} y={y}");
            }
        }
    }

    #[test]
    fn convex_along_segments() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let mut losses = smooth_losses();
        losses.push(Loss::Lad);
        for loss in losses {
            for _ in 0..1000 {
                let y = random_label(&loss, &mut rng);
                let (z1, z2) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
                let t: f64 = rng.random();
                let mid = loss.value(t * z1 + (1.0 - t) * z2, y).unwrap();
                let chord = t * loss.value(z1, y).unwrap() + (1.0 - t) * loss.value(z2, y).unwrap();
                assert!(mid <= chord + 1e-12);
                assert!(mid >= 0.0);
            }
        }
    }

    #[test]
    fn multiclass_gradient_sums_to_zero() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        let loss = Loss::MulticlassLogistic { k: 5 };
        for _ in 0..500 {
            let scores: Vec<f64> = (0..5).map(|_| rng.random_range(-30.0..30.0)).collect();
            let y = rng.random_range(0..5);
            let (v, g) = loss.multiclass_scores_and_grad(&scores, y).unwrap();
            assert!(v >= 0.0);
            assert!(g.iter().sum::<f64>().abs() <= 1e-12);
        }
    }
}
