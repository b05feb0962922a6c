use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::steps::{estimate_step_sizes, StepSize, StepSizes};
use super::{FitResult, LinearModel, Observer};
use crate::data::ColMatrix;
use crate::error::{Error, Result};
use crate::grad::DerivStream;
use crate::losses::Loss;
use crate::rng::{rng_from_seed, Rng};
use crate::robust::{fisher_yates_permutation, EstimatorSpec, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `p_j = 1/d`.
    #[default]
    Uniform,
    /// `p_j ∝ L_j`.
    Importance,
    /// Every cycle visits all coordinates in one order fixed from the seed.
    Cyclic,
}

/// Optional soft-thresholded, box-projected update
/// `θ_j ← clamp(θ_j − β_j·τ_{ε_j}(ĝ_j), lower_j, upper_j)`.
///
/// All vectors are indexed by parameter (feature-major, then class, then the
/// intercept block).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    #[default]
    None,
    SoftBox { eps: Vec<f64>, lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub sampling: Sampling,
    pub estimator: EstimatorSpec,
    /// Number of cycles of `d` coordinate updates each.
    pub max_cycles: usize,
    pub step_size: StepSize,
    pub threshold: Threshold,
    pub seed: u64,
    pub fit_intercept: bool,
    /// Starting point (zero by default).
    pub theta0: Option<Vec<f64>>,
    /// Recompute the cached scores exactly every this many cycles.
    pub resync_every: Option<usize>,
    /// Store a copy of `θ` every this many cycles.
    pub snapshot_every: Option<usize>,
    /// Record the training objective after each cycle.
    pub record_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sampling: Sampling::Uniform,
            estimator: EstimatorSpec::Erm,
            max_cycles: 100,
            step_size: StepSize::default(),
            threshold: Threshold::None,
            seed: 0,
            fit_intercept: false,
            theta0: None,
            resync_every: Some(100),
            snapshot_every: None,
            record_objective: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Mean training loss.
    pub objective: Option<f64>,
    /// Value returned by the observer (oracle excess risk in simulations).
    pub oracle: Option<f64>,
    /// Cumulative time spent in updates, excluding bookkeeping.
    pub elapsed_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub cycle: usize,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub degenerate_columns: Vec<usize>,
    pub step_bound_valid: bool,
    pub ch_unconverged: usize,
    pub resyncs: usize,
    /// Largest score drift found at a resynchronization.
    pub max_drift: f64,
    /// `max|I − Xθ|` at the end of the run, before any final resynchronization.
    pub final_drift: f64,
    /// Geometric-median calls that hit the iteration cap (gradient descent only).
    pub gm_unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    /// Entry 0 describes the starting point.
    pub cycles: Vec<CycleRecord>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
}

/// `sign(x)·max(|x| − ε, 0)`.
pub fn soft_threshold(x: f64, eps: f64) -> f64 {
    if x > eps {
        x - eps
    } else if x < -eps {
        x + eps
    } else {
        0.0
    }
}

pub(crate) fn design(x: &ColMatrix, fit_intercept: bool) -> std::borrow::Cow<'_, ColMatrix> {
    if fit_intercept {
        std::borrow::Cow::Owned(x.with_constant_column(1.0))
    } else {
        std::borrow::Cow::Borrowed(x)
    }
}

/// Step sizes for the design including the intercept column, whose smoothness
/// constant is `γ`.
pub(crate) fn steps_for(x: &ColMatrix, loss: Loss, mode: &StepSize, fit_intercept: bool, rng: &mut Rng) -> Result<StepSizes> {
    let d = x.n_cols();
    let gamma = loss.gamma();
    let explicit = match mode {
        StepSize::GivenLipschitz { lipschitz } => Some(lipschitz.len()),
        StepSize::Fixed { steps } => Some(steps.len()),
        StepSize::EstimatedMom { .. } => None,
    };
    if fit_intercept && explicit == Some(d + 1) {
        let full = x.with_constant_column(1.0);
        return estimate_step_sizes(&full, loss, mode, rng);
    }
    let mut s = estimate_step_sizes(x, loss, mode, rng)?;
    if fit_intercept {
        s.lipschitz.push(gamma);
        s.steps.push(1.0 / gamma);
    }
    Ok(s)
}

pub(crate) fn initial_theta(theta0: &Option<Vec<f64>>, dim: usize) -> Result<Vec<f64>> {
    match theta0 {
        None => Ok(vec![0.0; dim]),
        Some(t) if t.len() == dim && t.iter().all(|v| v.is_finite()) => Ok(t.clone()),
        Some(t) => Err(Error::config(format!("theta0 has length {}, expected {dim} finite values", t.len()))),
    }
}

fn validate_threshold(t: &Threshold, dim: usize) -> Result<()> {
    if let Threshold::SoftBox { eps, lower, upper } = t {
        if eps.len() != dim || lower.len() != dim || upper.len() != dim {
            return Err(Error::config(format!("threshold vectors must have length {dim}")));
        }
        if eps.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::config("threshold levels must be nonnegative"));
        }
        if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::config("box bounds must satisfy lower <= upper"));
        }
    }
    Ok(())
}

enum Picker {
    Uniform(usize),
    Importance(Vec<f64>),
    Cyclic(Vec<usize>),
}

impl Picker {
    fn pick(&self, t: usize, rng: &mut Rng) -> usize {
        match self {
            Picker::Uniform(d) => rng.random_range(0..*d),
            Picker::Importance(cum) => {
                let total = cum[cum.len() - 1];
                let u = rng.random::<f64>() * total;
                cum.partition_point(|&c| c <= u).min(cum.len() - 1)
            }
            Picker::Cyclic(order) => order[t % order.len()],
        }
    }
}

/// Robust coordinate gradient descent.
pub fn cgd_fit(x: &ColMatrix, y: &[f64], loss: Loss, config: &SolverConfig) -> Result<FitResult> {
    cgd_fit_with(x, y, loss, config, &mut ())
}

pub fn cgd_fit_with(
    x: &ColMatrix,
    y: &[f64],
    loss: Loss,
    config: &SolverConfig,
    observer: &mut dyn Observer,
) -> Result<FitResult> {
    if y.len() != x.n_rows() || x.n_rows() == 0 {
        return Err(Error::domain("empty dataset or label count mismatch"));
    }
    if x.n_cols() == 0 && !config.fit_intercept {
        return Err(Error::domain("no features to fit"));
    }
    config.estimator.validate(x.n_rows())?;
    if config.resync_every == Some(0) || config.snapshot_every == Some(0) {
        return Err(Error::config("resync and snapshot periods must be positive"));
    }
    let xd = design(x, config.fit_intercept);
    let xd: &ColMatrix = &xd;
    let d = xd.n_cols();
    let k = loss.n_outputs();
    let dim = d * k;
    validate_threshold(&config.threshold, dim)?;

    let mut rng = rng_from_seed(config.seed);
    let steps = steps_for(x, loss, &config.step_size, config.fit_intercept, &mut rng)?;
    let mut theta = initial_theta(&config.theta0, dim)?;
    if let Threshold::SoftBox { lower, upper, .. } = &config.threshold {
        for ((t, l), u) in theta.iter_mut().zip(lower).zip(upper) {
            *t = t.clamp(*l, *u);
        }
    }
    let picker = match config.sampling {
        Sampling::Uniform => Picker::Uniform(d),
        Sampling::Importance => {
            let mut acc = 0.0;
            Picker::Importance(
                steps
                    .lipschitz
                    .iter()
                    .map(|l| {
                        acc += l;
                        acc
                    })
                    .collect(),
            )
        }
        Sampling::Cyclic => Picker::Cyclic(fisher_yates_permutation(d, &mut rng)?),
    };

    let mut stream = DerivStream::new(xd, y, loss, &theta)?;
    let mut ws = Workspace::new();
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
        objective: config.record_objective.then(|| stream.objective()),
        oracle: observer.on_cycle(0, &theta),
        elapsed_ns: 0,
    });
    if config.snapshot_every.is_some() {
        record.snapshots.push(Snapshot { cycle: 0, theta: theta.clone() });
    }

    let mut g = vec![0.0; k];
    let mut delta = vec![0.0; k];
    let mut next = vec![0.0; k];
    let mut elapsed_ns: u64 = 0;
    let mut t = 0usize;
    for cycle in 1..=config.max_cycles {
        let start = Instant::now();
        for _ in 0..d {
            let j = picker.pick(t, &mut rng);
            stream.partial_derivative_unchecked(j, &config.estimator, &mut ws, &mut rng, &mut g);
            let beta = steps.steps[j];
            for c in 0..k {
                let idx = j * k + c;
                let old = theta[idx];
                next[c] = match &config.threshold {
                    Threshold::None => old - beta * g[c],
                    Threshold::SoftBox { eps, lower, upper } => {
                        (old - beta * soft_threshold(g[c], eps[idx])).clamp(lower[idx], upper[idx])
                    }
                };
                delta[c] = next[c] - old;
            }
            if delta.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { cycle, theta });
            }
            stream.apply(j, &delta);
            theta[j * k..(j + 1) * k].copy_from_slice(&next);
            t += 1;
            observer.on_iteration(t, &theta);
        }
        elapsed_ns += start.elapsed().as_nanos() as u64;

        if config.resync_every.is_some_and(|p| cycle % p == 0) {
            let drift = stream.drift(&theta);
            record.diagnostics.max_drift = record.diagnostics.max_drift.max(drift);
            record.diagnostics.resyncs += 1;
            stream.resync(&theta);
        }
        record.cycles.push(CycleRecord {
            cycle,
            objective: config.record_objective.then(|| stream.objective()),
            oracle: observer.on_cycle(cycle, &theta),
            elapsed_ns,
        });
        if config.snapshot_every.is_some_and(|p| cycle % p == 0) {
            record.snapshots.push(Snapshot { cycle, theta: theta.clone() });
        }
    }
    record.diagnostics.final_drift = stream.drift(&theta);
    record.diagnostics.ch_unconverged = ws.ch_unconverged;

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
