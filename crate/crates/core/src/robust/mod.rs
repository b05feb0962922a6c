//! Univariate robust location estimators and the selection primitives they
//! rely on.
//!
//! | estimator | hyper-parameter | cost |
//! |-----------|-----------------|------|
//! | ERM (mean) | none | `O(n)` |
//! | MOM | block count `K` | `O(n + K)` |
//! | TM  | trim proportion `ε` | `O(n)` average (quickselect) |
//! | CH  | confidence `δ` | `O(n)` per fixed-point iteration |

mod catoni;
mod moments;
mod mom;
mod select;
mod trimmed;

use serde::{Deserialize, Serialize};

pub use catoni::{chi, estimate_ch, estimate_ch_with, psi, ChEstimate, CHI_OFFSET, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use mom::{estimate_mom, mom_with_permutation, BlockPartition};
pub use moments::{
    blocks_from_confidence, estimate_mom_moment, mom_second_moment_upper_bound, second_moment_inflation,
    tm_eps_from_confidence, MomentBound, MomentBoundConfig, TrimLevel,
};
pub use select::{fisher_yates_permutation, median, median_in_place, quickselect, shuffle};
pub use trimmed::{estimate_tm, estimate_tm_in_place, trim_ranks};

pub(crate) use mom::block_boundaries;
#[allow(unused_imports)]
pub(crate) use moments::{mom_moment_with, reset_perm, second_moment_bound_with};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Which scalar estimator to apply and its hyper-parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Erm,
    Mom { blocks: usize },
    Tm { trim: f64 },
    Ch { delta: f64, max_iter: usize, tol: f64 },
}

impl EstimatorSpec {
    pub fn ch(delta: f64) -> Self {
        EstimatorSpec::Ch { delta, max_iter: DEFAULT_MAX_ITER, tol: DEFAULT_TOL }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Erm => "erm",
            EstimatorSpec::Mom { .. } => "mom",
            EstimatorSpec::Tm { .. } => "tm",
            EstimatorSpec::Ch { .. } => "ch",
        }
    }

    /// Checks the hyper-parameter against a sample of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            EstimatorSpec::Erm => {
                if n == 0 {
                    return Err(Error::domain("empty sample"));
                }
            }
            EstimatorSpec::Mom { blocks } => mom::check_blocks(n, blocks)?,
            EstimatorSpec::Tm { trim } => {
                trim_ranks(n, trim)?;
            }
            EstimatorSpec::Ch { delta, max_iter, tol } => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::domain(format!("CH confidence must be in (0, 1), got {delta}")));
                }
                if max_iter == 0 || !(tol > 0.0) {
                    return Err(Error::domain("CH needs max_iter >= 1 and tol > 0"));
                }
                if n == 0 {
                    return Err(Error::domain("empty sample"));
                }
            }
        }
        Ok(())
    }

    /// Estimates the location of `values`. The buffer may be reordered.
    pub fn estimate(&self, values: &mut [f64], ws: &mut Workspace, rng: &mut Rng) -> Result<f64> {
        self.validate(values.len())?;
        Ok(self.estimate_unchecked(values, ws, rng))
    }

    /// [`EstimatorSpec::estimate`] for a configuration already validated against
    /// `values.len()`.
    pub(crate) fn estimate_unchecked(&self, values: &mut [f64], ws: &mut Workspace, rng: &mut Rng) -> f64 {
        match *self {
            EstimatorSpec::Erm => values.iter().sum::<f64>() / values.len() as f64,
            EstimatorSpec::Mom { blocks } => {
                reset_perm(&mut ws.perm, values.len());
                shuffle(&mut ws.perm, rng);
                mom_with_permutation(values, &ws.perm, blocks, &mut ws.means)
            }
            EstimatorSpec::Tm { trim } => estimate_tm_in_place(values, trim).unwrap_or(f64::NAN),
            EstimatorSpec::Ch { delta, max_iter, tol } => {
                let est = estimate_ch_with(values, delta, max_iter, tol, &mut ws.means);
                match est {
                    Ok(e) => {
                        if !e.converged() {
                            ws.ch_unconverged += 1;
                        }
                        e.value
                    }
                    Err(_) => f64::NAN,
                }
            }
        }
    }
}

/// Reusable scratch memory so repeated estimator calls do not allocate.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    pub(crate) perm: Vec<usize>,
    pub(crate) means: Vec<f64>,
    /// Number of CH calls that hit `max_iter` in either fixed point.
    pub ch_unconverged: usize,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn dispatch_matches_direct_calls() {
        let v: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 - 40.0).collect();
        let mut ws = Workspace::new();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert_eq!(EstimatorSpec::Erm.estimate(&mut v.clone(), &mut ws, &mut rng_from_seed(0)).unwrap(), mean);
        let tm = EstimatorSpec::Tm { trim: 0.1 }.estimate(&mut v.clone(), &mut ws, &mut rng_from_seed(0)).unwrap();
        assert_eq!(tm, estimate_tm(&v, 0.1).unwrap());
        let mom = EstimatorSpec::Mom { blocks: 5 }.estimate(&mut v.clone(), &mut ws, &mut rng_from_seed(4)).unwrap();
        assert_eq!(mom, estimate_mom(&v, 5, &mut rng_from_seed(4)).unwrap());
        let ch = EstimatorSpec::ch(0.05).estimate(&mut v.clone(), &mut ws, &mut rng_from_seed(0)).unwrap();
        assert_eq!(ch, estimate_ch(&v, 0.05, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap().value);
    }

    #[test]
    fn validation() {
        assert!(EstimatorSpec::Mom { blocks: 11 }.validate(10).is_err());
        assert!(EstimatorSpec::Tm { trim: 0.5 }.validate(10).is_err());
        assert!(EstimatorSpec::ch(1.5).validate(10).is_err());
        assert!(EstimatorSpec::Erm.validate(0).is_err());
        assert!(EstimatorSpec::Mom { blocks: 10 }.validate(10).is_ok());
    }
}
