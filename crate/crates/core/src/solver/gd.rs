use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cgd::{design, initial_theta, steps_for, CycleRecord, Diagnostics, RunRecord, Snapshot};
use super::steps::StepSize;
use super::{FitResult, LinearModel, Observer};
use crate::data::ColMatrix;
use crate::datagen::{oracle_excess_risk, OracleInfo};
use crate::error::{Error, Result};
use crate::grad::{full_gradient, mean_loss, scores, VecEstimator};
use crate::losses::Loss;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub estimator: VecEstimator,
    /// Constant step; by default `1/(d·max_j L_j)` with `L_j` from
    /// [`StepSize::EstimatedMom`], an upper bound on the smoothness of the risk.
    pub step: Option<f64>,
    pub max_iters: usize,
    pub seed: u64,
    pub fit_intercept: bool,
    pub theta0: Option<Vec<f64>>,
    pub snapshot_every: Option<usize>,
    pub record_objective: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            estimator: VecEstimator::Erm,
            step: None,
            max_iters: 100,
            seed: 0,
            fit_intercept: false,
            theta0: None,
            snapshot_every: None,
            record_objective: true,
        }
    }
}

/// Gradient descent with a (robust) full-gradient estimator. Iterations are
/// recorded as cycles in the returned trace.
pub fn gd_fit(x: &ColMatrix, y: &[f64], loss: Loss, config: &GdConfig) -> Result<FitResult> {
    gd_fit_with(x, y, loss, config, &mut ())
}

pub fn gd_fit_with(
    x: &ColMatrix,
    y: &[f64],
    loss: Loss,
    config: &GdConfig,
    observer: &mut dyn Observer,
) -> Result<FitResult> {
    if y.len() != x.n_rows() || x.n_rows() == 0 {
        return Err(Error::domain("empty dataset or label count mismatch"));
    }
    if config.snapshot_every == Some(0) {
        return Err(Error::config("snapshot period must be positive"));
    }
    let xd = design(x, config.fit_intercept);
    let xd: &ColMatrix = &xd;
    let k = loss.n_outputs();
    let dim = xd.n_cols() * k;
    let mut rng = rng_from_seed(config.seed);
    let steps = steps_for(x, loss, &StepSize::default(), config.fit_intercept, &mut rng)?;
    let step = match config.step {
        Some(s) if s.is_finite() && s > 0.0 => s,
        Some(s) => return Err(Error::config(format!("step must be positive, got {s}"))),
        None => {
            let l_max = steps.lipschitz.iter().copied().fold(0.0, f64::max);
            1.0 / (l_max * xd.n_cols() as f64)
        }
    };
    let mut theta = initial_theta(&config.theta0, dim)?;
    let objective = |theta: &[f64]| mean_loss(loss, &scores(xd, theta, k), y);
    let mut record = RunRecord {
        diagnostics: Diagnostics {
            degenerate_columns: steps.degenerate.clone(),
            step_bound_valid: steps.bound_valid,
            ..Diagnostics::default()
        },
        ..RunRecord::default()
    };
    record.cycles.push(CycleRecord {
        cycle: 0,
        objective: config.record_objective.then(|| objective(&theta)),
        oracle: observer.on_cycle(0, &theta),
        elapsed_ns: 0,
    });
    if config.snapshot_every.is_some() {
        record.snapshots.push(Snapshot { cycle: 0, theta: theta.clone() });
    }
    let mut elapsed_ns = 0u64;
    for it in 1..=config.max_iters {
        let start = Instant::now();
        let g = full_gradient(xd, y, loss, &theta, &config.estimator, &mut rng)?;
        record.diagnostics.ch_unconverged += g.ch_unconverged;
        if !g.converged {
            record.diagnostics.gm_unconverged += 1;
        }
        let next: Vec<f64> = theta.iter().zip(&g.gradient).map(|(t, gv)| t - step * gv).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { cycle: it, theta });
        }
        theta = next;
        elapsed_ns += start.elapsed().as_nanos() as u64;
        observer.on_iteration(it, &theta);
        record.cycles.push(CycleRecord {
            cycle: it,
            objective: config.record_objective.then(|| objective(&theta)),
            oracle: observer.on_cycle(it, &theta),
            elapsed_ns,
        });
        if config.snapshot_every.is_some_and(|p| it % p == 0) {
            record.snapshots.push(Snapshot { cycle: it, theta: theta.clone() });
        }
    }
    let mut steps = steps;
    steps.steps = vec![step; xd.n_cols()];
    let model = LinearModel {
        loss,
        n_features: x.n_cols(),
        fit_intercept: config.fit_intercept,
        theta,
        feature_names: Vec::new(),
        classes: Vec::new(),
    };
    Ok(FitResult { model, record, steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub theta: Vec<f64>,
    /// Excess risk at the start and after every iteration.
    pub excess_risk: Vec<f64>,
}

/// Gradient descent on the population least-squares risk,
/// `θ ← θ − step·Σ(θ − θ*)`, started from `theta0` (zero by default).
pub fn oracle_gd_fit(info: &OracleInfo, theta0: Option<&[f64]>, step: f64, max_iters: usize) -> Result<OracleRun> {
    let d = info.theta_star.len();
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::config(format!("step must be positive, got {step}")));
    }
    let mut theta = match theta0 {
        Some(t) if t.len() == d => t.to_vec(),
        Some(t) => return Err(Error::config(format!("theta0 has length {}, expected {d}", t.len()))),
        None => vec![0.0; d],
    };
    let mut excess_risk = vec![oracle_excess_risk(info, &theta)?];
    let mut err = vec![0.0; d];
    for _ in 0..max_iters {
        for (e, (t, s)) in err.iter_mut().zip(theta.iter().zip(&info.theta_star)) {
            *e = t - s;
        }
        for (i, t) in theta.iter_mut().enumerate() {
            let g: f64 = info.sigma[i].iter().zip(&err).map(|(a, b)| a * b).sum();
            *t -= step * g;
        }
        excess_risk.push(oracle_excess_risk(info, &theta)?);
    }
    Ok(OracleRun { theta, excess_risk })
}
