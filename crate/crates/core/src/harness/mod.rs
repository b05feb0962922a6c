//! Benchmark sweeps and estimator timings that emit NDJSON records.

mod bench;
mod timing;

pub use bench::{
    blocks_for, evaluate, run_bench, AlgoSpec, BenchPlan, DatasetSource, Family, Metric, SolverKind, GRID_POINTS,
};
pub use timing::{loglog_slope, time_estimators, timed_estimators, SampleDistribution, TimingPlan};

use crate::error::{Error, Result};

pub const THREADS_VAR: &str = "ROBUSTCGD_THREADS";

/// Sizes the global rayon pool from `ROBUSTCGD_THREADS` when set. Returns the
/// thread count in effect.
pub fn configure_threads() -> Result<usize> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(rayon::current_num_threads());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(rayon::current_num_threads())
}
