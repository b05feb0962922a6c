use serde::{Deserialize, Serialize};

use crate::data::ColMatrix;
use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::rng::Rng;
use crate::robust::{second_moment_bound_with, MomentBoundConfig};

const LIPSCHITZ_FLOOR: f64 = 1e-12;

/// How the coordinate step sizes `β_j` are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSize {
    /// Known smoothness constants; `β_j = 1/L_j`.
    GivenLipschitz { lipschitz: Vec<f64> },
    /// `L_j = γ·Û_j` with `Û_j` a MOM upper bound on `E[(Xʲ)²]`.
    EstimatedMom { delta: f64, ratio_constant: f64, alpha: f64 },
    /// Step sizes used as given.
    Fixed { steps: Vec<f64> },
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::EstimatedMom { delta: 0.01, ratio_constant: 1.0, alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub steps: Vec<f64>,
    pub lipschitz: Vec<f64>,
    /// Columns whose estimate was zero and fell back to the empirical mean or
    /// the floor.
    pub degenerate: Vec<usize>,
    /// False if the high-probability inflation could not be applied (`n` too
    /// small for the requested confidence).
    pub bound_valid: bool,
}

/// Step sizes for every column of `x` (one per feature; class blocks share it).
pub fn estimate_step_sizes(x: &ColMatrix, loss: Loss, mode: &StepSize, rng: &mut Rng) -> Result<StepSizes> {
    let d = x.n_cols();
    let n = x.n_rows();
    if n == 0 || d == 0 {
        return Err(Error::domain("step sizes need a nonempty design"));
    }
    let check = |v: &[f64], what: &str| {
        if v.len() != d {
            return Err(Error::config(format!("expected {d} {what}, got {}", v.len())));
        }
        if v.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::config(format!("{what} must be finite and positive")));
        }
        Ok(())
    };
    match mode {
        StepSize::GivenLipschitz { lipschitz } => {
            check(lipschitz, "lipschitz constants")?;
            Ok(StepSizes {
                steps: lipschitz.iter().map(|l| 1.0 / l).collect(),
                lipschitz: lipschitz.clone(),
                degenerate: Vec::new(),
                bound_valid: true,
            })
        }
        StepSize::Fixed { steps } => {
            check(steps, "step sizes")?;
            Ok(StepSizes {
                steps: steps.clone(),
                lipschitz: steps.iter().map(|b| 1.0 / b).collect(),
                degenerate: Vec::new(),
                bound_valid: true,
            })
        }
        StepSize::EstimatedMom { delta, ratio_constant, alpha } => {
            let config = MomentBoundConfig { delta: *delta, ratio_constant: *ratio_constant, alpha: *alpha };
            if !(*delta > 0.0 && *delta < 1.0) || !(*alpha > 0.0 && *alpha <= 1.0) || !(*ratio_constant >= 0.0) {
                return Err(Error::config("step estimation needs delta in (0, 1), alpha in (0, 1], C >= 0"));
            }
            let blocks = ((18.0 * (2.0 * d as f64 / delta).ln()).ceil() as usize).clamp(1, n);
            let gamma = loss.gamma();
            let (mut perm, mut means) = (Vec::new(), Vec::new());
            let mut squares = vec![0.0; n];
            let mut lipschitz = Vec::with_capacity(d);
            let mut degenerate = Vec::new();
            let mut bound_valid = true;
            for j in 0..d {
                for (s, v) in squares.iter_mut().zip(x.col(j)) {
                    *s = v * v;
                }
                let b = second_moment_bound_with(&squares, blocks, config, rng, &mut perm, &mut means)?;
                bound_valid &= b.bound_valid;
                let mut u = b.value;
                if !(u > 0.0) {
                    degenerate.push(j);
                    u = squares.iter().sum::<f64>() / n as f64;
                }
                lipschitz.push((gamma * u).max(LIPSCHITZ_FLOOR));
            }
            Ok(StepSizes { steps: lipschitz.iter().map(|l| 1.0 / l).collect(), lipschitz, degenerate, bound_valid })
        }
    }
}
