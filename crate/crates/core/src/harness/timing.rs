//! Wall-clock comparison of the scalar estimators on identical buffers.

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::Record;
use crate::datagen::{student_t, STUDENT_DF};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::robust::{blocks_from_confidence, tm_eps_from_confidence, EstimatorSpec, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleDistribution {
    StudentT { nu: f64 },
    Gaussian,
}

impl Default for SampleDistribution {
    fn default() -> Self {
        SampleDistribution::StudentT { nu: STUDENT_DF }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingPlan {
    /// Ascending sample sizes.
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub warmup: usize,
    pub distribution: SampleDistribution,
    /// Confidence level setting the MOM blocks, the TM level and the CH scale.
    pub delta: f64,
    pub seed: u64,
}

impl Default for TimingPlan {
    fn default() -> Self {
        TimingPlan {
            n_grid: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            reps: 100,
            warmup: 3,
            distribution: SampleDistribution::default(),
            delta: 0.01,
            seed: 0,
        }
    }
}

/// The four estimators as configured for a sample of size `n`.
pub fn timed_estimators(n: usize, delta: f64) -> Result<[EstimatorSpec; 4]> {
    let blocks = blocks_from_confidence(delta)?.min(n);
    let trim = tm_eps_from_confidence(delta, 0.0, n)?.eps;
    Ok([EstimatorSpec::Erm, EstimatorSpec::Mom { blocks }, EstimatorSpec::Tm { trim }, EstimatorSpec::ch(delta)])
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// One record per (n, estimator) with the mean wall time in nanoseconds as
/// the metric and the standard deviation in `params`. Buffer copies are not
/// timed.
pub fn time_estimators(plan: &TimingPlan) -> Result<Vec<Record>> {
    if plan.n_grid.is_empty() || plan.n_grid.windows(2).any(|w| w[0] >= w[1]) || plan.n_grid[0] == 0 {
        return Err(Error::config("n grid must be nonempty, positive and strictly ascending"));
    }
    if plan.reps == 0 {
        return Err(Error::config("reps must be at least 1"));
    }
    let mut records = Vec::new();
    let mut ws = Workspace::new();
    for (gi, &n) in plan.n_grid.iter().enumerate() {
        let mut rng = substream(plan.seed, gi as u64);
        let source: Vec<f64> = (0..n)
            .map(|_| match plan.distribution {
                SampleDistribution::StudentT { nu } => student_t(nu, &mut rng),
                SampleDistribution::Gaussian => StandardNormal.sample(&mut rng),
            })
            .collect();
        let mut buf = source.clone();
        for spec in timed_estimators(n, plan.delta)? {
            spec.validate(n)?;
            let mut est_rng = substream(plan.seed, 1000 + gi as u64);
            let mut times = Vec::with_capacity(plan.reps);
            let mut last = 0.0;
            for r in 0..plan.warmup + plan.reps {
                buf.copy_from_slice(&source);
                let start = Instant::now();
                last = std::hint::black_box(spec.estimate_unchecked(&mut buf, &mut ws, &mut est_rng));
                let ns = start.elapsed().as_nanos() as f64;
                if r >= plan.warmup {
                    times.push(ns);
                }
            }
            let (mean, std) = mean_std(&times);
            records.push(Record {
                run_id: format!("time/{}/n{n}", spec.name()),
                algo: "time-estimators".into(),
                estimator: spec.name().into(),
                params: json!({
                    "n": n,
                    "reps": plan.reps,
                    "warmup": plan.warmup,
                    "std_ns": std,
                    "estimator": spec,
                    "estimate": last,
                }),
                cycle: None,
                metric_name: "mean_ns".into(),
                metric_value: Some(mean),
                elapsed_ns: times.iter().sum::<f64>() as u64,
                seed: plan.seed,
            });
        }
    }
    Ok(records)
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log10(), y.log10())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
