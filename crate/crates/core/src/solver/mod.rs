//! Optimizers: robust coordinate gradient descent, full-gradient baselines and
//! step-size estimation.

mod cgd;
mod gd;
mod model;
mod steps;

use serde::{Deserialize, Serialize};

pub use cgd::{
    cgd_fit, cgd_fit_with, soft_threshold, CycleRecord, Diagnostics, RunRecord, Sampling, Snapshot, SolverConfig,
    Threshold,
};
pub use gd::{gd_fit, gd_fit_with, oracle_gd_fit, GdConfig, OracleRun};
pub use model::LinearModel;
pub use steps::{estimate_step_sizes, StepSize, StepSizes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: LinearModel,
    pub record: RunRecord,
    pub steps: StepSizes,
}

/// Hooks called by the solvers; `theta` is the full parameter vector.
pub trait Observer {
    /// After every coordinate update (every iteration for gradient descent).
    fn on_iteration(&mut self, _iteration: usize, _theta: &[f64]) {}

    /// After every cycle, and once before the first; the returned value is stored
    /// as [`CycleRecord::oracle`].
    fn on_cycle(&mut self, _cycle: usize, _theta: &[f64]) -> Option<f64> {
        None
    }
}

impl Observer for () {}

/// Records `f(θ)` after every cycle.
pub struct CycleMetric<F>(pub F);

impl<F: FnMut(&[f64]) -> f64> Observer for CycleMetric<F> {
    fn on_cycle(&mut self, _cycle: usize, theta: &[f64]) -> Option<f64> {
        Some((self.0)(theta))
    }
}
