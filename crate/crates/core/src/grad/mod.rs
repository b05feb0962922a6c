//! Estimates of partial derivatives and full gradients of the risk.

mod bound;
mod geomedian;
mod stream;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bound::{bound_inputs_at, error_vector_bound, mom_constant, BoundInputs};
pub use geomedian::{geometric_median, objective as geometric_median_objective, GeometricMedian, DEFAULT_GM_MAX_ITER, DEFAULT_GM_TOL};
pub use stream::{empirical_risk, mean_loss, DerivStream};

#[allow(unused_imports)]
pub(crate) use stream::scores;

use crate::data::ColMatrix;
use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::rng::{substream, Rng};
use crate::robust::{fisher_yates_permutation, EstimatorSpec, Workspace};

/// Full-gradient estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VecEstimator {
    /// Sample mean of the per-sample gradients.
    Erm,
    /// A scalar estimator applied to each coordinate independently.
    Coordwise { estimator: EstimatorSpec },
    /// Geometric median of `blocks` block-mean gradients.
    Gmom { blocks: usize },
}

impl VecEstimator {
    pub fn name(&self) -> String {
        match self {
            VecEstimator::Erm => "erm".into(),
            VecEstimator::Coordwise { estimator } => format!("coord_{}", estimator.name()),
            VecEstimator::Gmom { .. } => "gmom".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub gradient: Vec<f64>,
    /// CH calls that hit the iteration cap (coordinatewise CH only).
    pub ch_unconverged: usize,
    /// Whether the geometric median converged (always true for other kinds).
    pub converged: bool,
}

/// Estimate of `∇R(θ)`. Coordinatewise estimation runs in parallel with one RNG
/// substream per coordinate drawn from `rng`, so the result does not depend on
/// the thread count.
pub fn full_gradient(
    x: &ColMatrix,
    y: &[f64],
    loss: Loss,
    theta: &[f64],
    kind: &VecEstimator,
    rng: &mut Rng,
) -> Result<GradientEstimate> {
    let mut stream = DerivStream::new(x, y, loss, theta)?;
    let k = stream.block_size();
    let n = x.n_rows();
    let dim = x.n_cols() * k;
    let derivs = stream.score_derivatives();
    match kind {
        VecEstimator::Erm => {
            let mut g = vec![0.0; dim];
            for j in 0..x.n_cols() {
                let col = x.col(j);
                for c in 0..k {
                    let s: f64 = col.iter().enumerate().map(|(i, &xv)| derivs[i * k + c] * xv).sum();
                    g[j * k + c] = s / n as f64;
                }
            }
            Ok(GradientEstimate { gradient: g, ch_unconverged: 0, converged: true })
        }
        VecEstimator::Coordwise { estimator } => {
            estimator.validate(n)?;
            let base = rng.next_u64();
            let results: Vec<(f64, usize)> = (0..dim)
                .into_par_iter()
                .map_init(
                    || (vec![0.0; n], Workspace::new()),
                    |(buf, ws), idx| {
                        let (j, c) = (idx / k, idx % k);
                        for ((b, &xv), i) in buf.iter_mut().zip(x.col(j)).zip(0..) {
                            *b = derivs[i * k + c] * xv;
                        }
                        ws.ch_unconverged = 0;
                        // a fresh identity permutation keeps coordinates independent of scheduling
                        ws.perm.clear();
                        let mut r = substream(base, idx as u64);
                        let v = estimator.estimate_unchecked(buf, ws, &mut r);
                        (v, ws.ch_unconverged)
                    },
                )
                .collect();
            let ch_unconverged = results.iter().map(|r| r.1).sum();
            Ok(GradientEstimate { gradient: results.into_iter().map(|r| r.0).collect(), ch_unconverged, converged: true })
        }
        VecEstimator::Gmom { blocks } => {
            let blocks = *blocks;
            if blocks == 0 || blocks > n {
                return Err(Error::domain(format!("block count must be in [1, {n}], got {blocks}")));
            }
            let mut perm = fisher_yates_permutation(n, rng)?;
            let bounds = crate::robust::block_boundaries(n, blocks);
            let mut means = vec![vec![0.0; dim]; blocks];
            for (b, m) in means.iter_mut().enumerate() {
                let idx = &mut perm[bounds[b]..bounds[b + 1]];
                // sample order inside a block does not matter; sorted is cache friendly
                idx.sort_unstable();
                let idx = &*idx;
                let size = idx.len() as f64;
                for j in 0..x.n_cols() {
                    let col = x.col(j);
                    for c in 0..k {
                        m[j * k + c] = idx.iter().map(|&i| derivs[i * k + c] * col[i]).sum::<f64>() / size;
                    }
                }
            }
            let gm = geometric_median(&means, DEFAULT_GM_TOL, DEFAULT_GM_MAX_ITER)?;
            Ok(GradientEstimate { gradient: gm.point, ch_unconverged: 0, converged: gm.converged })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn random_problem(n: usize, d: usize, seed: u64) -> (ColMatrix, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = ColMatrix::from_col_major(n, d, data).unwrap();
        let y: Vec<f64> = (0..n).map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x.row(i).iter().sum::<f64>() + e
        }).collect();
        (x, y)
    }

    #[test]
    fn erm_single_sample() {
        let x = ColMatrix::from_rows(&[vec![2.0, -1.0]]).unwrap();
        let theta = [0.5, 1.0];
        let g = full_gradient(&x, &[3.0], Loss::Square, &theta, &VecEstimator::Erm, &mut rng_from_seed(0)).unwrap();
        // residual 0 − 3 = −3
        assert_eq!(g.gradient, vec![-6.0, 3.0]);
    }

    #[test]
    fn erm_matches_finite_differences() {
        let (x, y) = random_problem(50, 3, 4);
        let labels: Vec<f64> = y.iter().map(|v| if *v > 0.0 { 1.0 } else { -1.0 }).collect();
        let classes: Vec<f64> = y.iter().map(|v| ((v.abs() * 3.0) as usize % 3) as f64).collect();
        let cases = [
            (Loss::Square, y.clone()),
            (Loss::Huber { tau: 1.35 }, y.clone()),
            (Loss::Logistic, labels),
            (Loss::MulticlassLogistic { k: 3 }, classes),
        ];
        let mut rng = rng_from_seed(11);
        for (loss, yy) in cases {
            let dim = 3 * loss.n_outputs();
            for _ in 0..5 {
                let theta: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let g = full_gradient(&x, &yy, loss, &theta, &VecEstimator::Erm, &mut rng).unwrap().gradient;
                for t in 0..dim {
                    let h = 1e-6;
                    let mut a = theta.clone();
                    let mut b = theta.clone();
                    a[t] += h;
                    b[t] -= h;
                    let fd = (empirical_risk(&x, &yy, loss, &a).unwrap() - empirical_risk(&x, &yy, loss, &b).unwrap())
                        / (2.0 * h);
                    assert!((fd - g[t]).abs() <= 1e-5 * (1.0 + g[t].abs()), "{loss:?} {t}: {fd} vs {}", g[t]);
                }
            }
        }
    }

    #[test]
    fn coordwise_matches_stream_and_is_thread_independent() {
        let (x, y) = random_problem(200, 4, 1);
        let theta = [0.1, -0.2, 0.3, 0.0];
        let kind = VecEstimator::Coordwise { estimator: EstimatorSpec::Mom { blocks: 9 } };
        let a = full_gradient(&x, &y, Loss::Square, &theta, &kind, &mut rng_from_seed(5)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| full_gradient(&x, &y, Loss::Square, &theta, &kind, &mut rng_from_seed(5)).unwrap());
        assert_eq!(a, b);
        let erm = full_gradient(&x, &y, Loss::Square, &theta, &VecEstimator::Erm, &mut rng_from_seed(0)).unwrap();
        let tm0 = VecEstimator::Coordwise { estimator: EstimatorSpec::Tm { trim: 0.0 } };
        let c = full_gradient(&x, &y, Loss::Square, &theta, &tm0, &mut rng_from_seed(0)).unwrap();
        for (u, v) in c.gradient.iter().zip(&erm.gradient) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gmom_one_block_is_the_mean() {
        let (x, y) = random_problem(30, 2, 3);
        let theta = [0.4, -0.1];
        let g = full_gradient(&x, &y, Loss::Square, &theta, &VecEstimator::Gmom { blocks: 1 }, &mut rng_from_seed(0))
            .unwrap();
        let e = full_gradient(&x, &y, Loss::Square, &theta, &VecEstimator::Erm, &mut rng_from_seed(0)).unwrap();
        assert_eq!(g.gradient, e.gradient);
        assert!(full_gradient(&x, &y, Loss::Square, &theta, &VecEstimator::Gmom { blocks: 31 }, &mut rng_from_seed(0))
            .is_err());
    }
}
