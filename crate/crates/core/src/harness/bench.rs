//! Corruption sweeps: split the data, corrupt the training part, pick
//! hyper-parameters on the validation part and score on the test part.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{load_csv, split, CsvOptions, Dataset, LabelColumn, Preprocessor, Record, SplitSpec, Task, TaskHint};
use crate::datagen::{corrupt_dataset, oracle_excess_risk, simulate, CorruptionSpec, Mechanism, OracleInfo, SimSpec};
use crate::error::{Error, Result};
use crate::grad::VecEstimator;
use crate::losses::Loss;
use crate::rng::substream_seed;
use crate::robust::{median, EstimatorSpec};
use crate::solver::{cgd_fit, gd_fit, GdConfig, LinearModel, Sampling, SolverConfig, StepSize};

pub const GRID_POINTS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        label: String,
        #[serde(default)]
        task: TaskHint,
        #[serde(default)]
        categorical: Vec<String>,
    },
    /// A fresh draw per repetition, seeded from the spec seed and the repetition.
    Simulated { spec: SimSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Accuracy,
    /// Population excess risk; simulated sources only.
    OracleExcessRisk,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Accuracy => "accuracy",
            Metric::OracleExcessRisk => "oracle_excess_risk",
        }
    }

    pub fn higher_is_better(&self) -> bool {
        matches!(self, Metric::Accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Cgd,
    Gd,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Cgd => "cgd",
            SolverKind::Gd => "gd",
        }
    }
}

/// Estimator family; the hyper-parameter comes from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Erm,
    /// Grid over `block_size = K/n`.
    Mom,
    /// Grid over the trimming level.
    Tm,
    /// Grid over the confidence level.
    Ch,
    /// Geometric median of block gradients (GD only); grid over `block_size`.
    Gmom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Erm => "erm",
            Family::Mom => "mom",
            Family::Tm => "tm",
            Family::Ch => "ch",
            Family::Gmom => "gmom",
        }
    }

    /// The grid used when a plan does not give one.
    pub fn default_grid(&self) -> Vec<f64> {
        let k = GRID_POINTS;
        match self {
            Family::Erm => Vec::new(),
            Family::Mom | Family::Gmom => log_grid(1e-5, 0.2, k),
            Family::Tm => (0..k).map(|i| 1e-5 + (0.3 - 1e-5) * i as f64 / (k - 1) as f64).collect(),
            // [e^-10, 1) with the right end excluded
            Family::Ch => (0..k).map(|i| (-10.0 + 10.0 * i as f64 / k as f64).exp()).collect(),
        }
    }

    fn check_value(&self, v: f64) -> Result<()> {
        let ok = match self {
            Family::Erm => false,
            Family::Mom | Family::Gmom => v > 0.0 && v <= 1.0,
            Family::Tm => (0.0..0.5).contains(&v),
            Family::Ch => v > 0.0 && v < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("grid value {v} is invalid for the {} estimator", self.name())))
        }
    }
}

fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

/// Number of blocks for a block size relative to the sample size.
pub fn blocks_for(block_size: f64, n: usize) -> usize {
    ((block_size * n as f64).ceil() as usize).clamp(1, n.max(1))
}

fn default_sampling() -> Sampling {
    Sampling::Importance
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoSpec {
    /// Defaults to `"{solver}-{estimator}"`.
    #[serde(default)]
    pub name: Option<String>,
    pub solver: SolverKind,
    pub estimator: Family,
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
    /// Overrides the plan loss.
    #[serde(default)]
    pub loss: Option<Loss>,
}

impl AlgoSpec {
    pub fn new(solver: SolverKind, estimator: Family) -> Self {
        AlgoSpec { name: None, solver, estimator, grid: None, sampling: default_sampling(), loss: None }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}-{}", self.solver.name(), self.estimator.name()))
    }

    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone().unwrap_or_else(|| self.estimator.default_grid())
    }
}

fn default_repetitions() -> usize {
    1
}

fn default_cycles() -> usize {
    50
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    pub dataset: DatasetSource,
    /// Defaults to square loss for regression, logistic for two classes and
    /// multiclass logistic otherwise.
    #[serde(default)]
    pub loss: Option<Loss>,
    pub algorithms: Vec<AlgoSpec>,
    pub corruption_levels: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Defaults to MSE or accuracy for CSV sources and oracle excess risk for
    /// simulated ones.
    #[serde(default)]
    pub metric: Option<Metric>,
    /// CGD cycles or GD iterations per fit.
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    #[serde(default)]
    pub seed: u64,
    /// Split fractions; the split seed is derived from `seed` and the repetition.
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub mechanism: Mechanism,
    /// Ignored for the oracle metric, which scores the raw coefficients.
    #[serde(default = "default_true")]
    pub fit_intercept: bool,
    /// CGD step sizes.
    #[serde(default)]
    pub step_size: StepSize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl BenchPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("a plan needs at least one algorithm"));
        }
        if self.corruption_levels.is_empty() {
            return Err(Error::config("a plan needs at least one corruption level"));
        }
        for &eta in &self.corruption_levels {
            if !(0.0..0.5).contains(&eta) {
                return Err(Error::config(format!("corruption level must be in [0, 0.5), got {eta}")));
            }
        }
        self.split.validate()?;
        let mut names = HashSet::new();
        for a in &self.algorithms {
            if !names.insert(a.label()) {
                return Err(Error::config(format!("duplicate algorithm name {:?}", a.label())));
            }
            if a.estimator == Family::Gmom && a.solver == SolverKind::Cgd {
                return Err(Error::config("the gmom estimator needs the gd solver"));
            }
            let grid = a.grid();
            if a.estimator != Family::Erm && grid.is_empty() {
                return Err(Error::config(format!("empty grid for {}", a.label())));
            }
            for v in grid {
                a.estimator.check_value(v)?;
            }
        }
        if self.metric == Some(Metric::OracleExcessRisk) && !matches!(self.dataset, DatasetSource::Simulated { .. }) {
            return Err(Error::config("the oracle metric needs a simulated dataset"));
        }
        Ok(())
    }
}

struct Prepared {
    train: Dataset,
    val: Dataset,
    test: Dataset,
    oracle: Option<OracleInfo>,
}

struct Outcome {
    hyper: Value,
    val_metric: f64,
    test_metric: f64,
    elapsed_ns: u64,
    seed: u64,
}

fn default_loss(task: Task) -> Loss {
    match task {
        Task::Regression => Loss::Square,
        Task::Binary => Loss::Logistic,
        Task::Multiclass { k } => Loss::MulticlassLogistic { k },
    }
}

fn prepare(plan: &BenchPlan, raw: Option<&Dataset>, metric: Metric, eta: f64, eta_idx: usize, rep: usize) -> Result<Prepared> {
    let rep_seed = substream_seed(plan.seed, rep as u64);
    let (full, oracle) = match (&plan.dataset, raw) {
        (DatasetSource::Simulated { spec }, _) => {
            let spec = SimSpec { seed: substream_seed(spec.seed, rep as u64), ..spec.clone() };
            let (ds, info) = simulate(&spec)?;
            (ds, Some(info))
        }
        (_, Some(ds)) => (ds.clone(), None),
        (_, None) => return Err(Error::config("CSV source was not loaded")),
    };
    let (train, val, test) = split(&full, &SplitSpec { seed: rep_seed, ..plan.split })?;
    let corruption = CorruptionSpec { rate: eta, seed: substream_seed(rep_seed, 1 + eta_idx as u64), mechanism: plan.mechanism };
    if metric == Metric::OracleExcessRisk {
        let train = corrupt_dataset(&train, &corruption)?.dataset;
        return Ok(Prepared { train, val, test, oracle });
    }
    // labels are scaled with clean statistics; features after corruption
    let scaler = Preprocessor::fit(&train).with_label_scaling(&train);
    let (train, val, test) = (scaler.scale_labels(&train), scaler.scale_labels(&val), scaler.scale_labels(&test));
    let train = corrupt_dataset(&train, &corruption)?.dataset;
    let p = Preprocessor::fit(&train);
    Ok(Prepared { train: p.transform(&train)?, val: p.transform(&val)?, test: p.transform(&test)?, oracle })
}

fn hyper_json(family: Family, value: Option<f64>, n: usize) -> Value {
    match (family, value) {
        (Family::Mom | Family::Gmom, Some(bs)) => json!({"block_size": bs, "blocks": blocks_for(bs, n)}),
        (Family::Tm, Some(t)) => json!({"trim": t}),
        (Family::Ch, Some(d)) => json!({"delta": d}),
        _ => json!({}),
    }
}

fn scalar_spec(family: Family, value: f64, n: usize) -> Result<EstimatorSpec> {
    Ok(match family {
        Family::Erm => EstimatorSpec::Erm,
        Family::Mom => EstimatorSpec::Mom { blocks: blocks_for(value, n) },
        Family::Tm => EstimatorSpec::Tm { trim: value },
        Family::Ch => EstimatorSpec::ch(value),
        Family::Gmom => return Err(Error::config("the gmom estimator needs the gd solver")),
    })
}

fn fit_one(plan: &BenchPlan, algo: &AlgoSpec, loss: Loss, value: Option<f64>, train: &Dataset, seed: u64, fit_intercept: bool) -> Result<LinearModel> {
    let cycles = plan.cycles;
    let n = train.n_samples();
    let v = value.unwrap_or(0.0);
    let fit = match algo.solver {
        SolverKind::Cgd => {
            let cfg = SolverConfig {
                sampling: algo.sampling,
                estimator: scalar_spec(algo.estimator, v, n)?,
                max_cycles: cycles,
                step_size: plan.step_size.clone(),
                seed,
                fit_intercept,
                record_objective: false,
                ..SolverConfig::default()
            };
            cgd_fit(&train.features, &train.labels, loss, &cfg)?
        }
        SolverKind::Gd => {
            let estimator = match algo.estimator {
                Family::Erm => VecEstimator::Erm,
                Family::Gmom => VecEstimator::Gmom { blocks: blocks_for(v, n) },
                f => VecEstimator::Coordwise { estimator: scalar_spec(f, v, n)? },
            };
            let cfg = GdConfig { estimator, max_iters: cycles, seed, fit_intercept, record_objective: false, ..GdConfig::default() };
            gd_fit(&train.features, &train.labels, loss, &cfg)?
        }
    };
    Ok(fit.model)
}

/// Scores `model` on `data`.
pub fn evaluate(metric: Metric, model: &LinearModel, data: &Dataset, oracle: Option<&OracleInfo>) -> Result<f64> {
    match metric {
        Metric::Mse => {
            let pred = model.predict(&data.features)?;
            Ok(pred.iter().zip(&data.labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / data.n_samples() as f64)
        }
        Metric::Accuracy => {
            let pred = model.predict(&data.features)?;
            let hits = pred.iter().zip(&data.labels).filter(|(p, y)| p == y).count();
            Ok(hits as f64 / data.n_samples() as f64)
        }
        Metric::OracleExcessRisk => {
            let info = oracle.ok_or_else(|| Error::config("the oracle metric needs a simulated dataset"))?;
            if model.fit_intercept {
                return Err(Error::config("the oracle metric scores models without intercept"));
            }
            oracle_excess_risk(info, &model.theta)
        }
    }
}

/// True when `a` beats `b`; non-finite scores lose.
fn better(metric: Metric, a: f64, b: f64) -> bool {
    match (a.is_finite(), b.is_finite()) {
        (true, false) => true,
        (false, _) => false,
        _ if metric.higher_is_better() => a > b,
        _ => a < b,
    }
}

fn run_task(plan: &BenchPlan, metric: Metric, algo: &AlgoSpec, data: &Prepared, seed: u64) -> Result<Outcome> {
    let loss = algo.loss.or(plan.loss).unwrap_or_else(|| default_loss(data.train.task));
    let fit_intercept = plan.fit_intercept && metric != Metric::OracleExcessRisk;
    let values: Vec<Option<f64>> = match algo.estimator {
        Family::Erm => vec![None],
        _ => algo.grid().into_iter().map(Some).collect(),
    };
    let n = data.train.n_samples();
    // oracle runs select on the population criterion, others on validation
    let selection = |m: &LinearModel| match metric {
        Metric::OracleExcessRisk => evaluate(metric, m, &data.val, data.oracle.as_ref()),
        _ => evaluate(metric, m, &data.val, None),
    };
    let mut best: Option<(LinearModel, Option<f64>, f64, u64)> = None;
    let mut last_err = None;
    for value in values {
        let start = Instant::now();
        let fitted = fit_one(plan, algo, loss, value, &data.train, seed, fit_intercept);
        let elapsed = start.elapsed().as_nanos() as u64;
        match fitted.and_then(|m| selection(&m).map(|s| (m, s))) {
            Ok((m, score)) => {
                if best.as_ref().is_none_or(|b| better(metric, score, b.2)) {
                    best = Some((m, value, score, elapsed));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((model, value, val_metric, elapsed_ns)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::config("no configuration was fitted")));
    };
    // the refit on the full training split with the chosen value is the same
    // seeded run, so the selected model is reused
    let test_metric = evaluate(metric, &model, &data.test, data.oracle.as_ref())?;
    Ok(Outcome { hyper: hyper_json(algo.estimator, value, n), val_metric, test_metric, elapsed_ns, seed })
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Runs every (corruption level, algorithm, repetition) task on the current
/// rayon pool. Records come out ordered by that key, each group followed by
/// its median summary, whatever the thread count.
pub fn run_bench(plan: &BenchPlan) -> Result<Vec<Record>> {
    plan.validate()?;
    let raw = match &plan.dataset {
        DatasetSource::Csv { path, label, task, categorical } => {
            let opts = CsvOptions { label: LabelColumn::Name(label.clone()), task: *task, categorical: categorical.clone() };
            Some(load_csv(path, &opts)?.dataset)
        }
        DatasetSource::Simulated { .. } => None,
    };
    let metric = match (plan.metric, &raw) {
        (Some(m), _) => m,
        (None, Some(ds)) if ds.task.is_classification() => Metric::Accuracy,
        (None, Some(_)) => Metric::Mse,
        (None, None) => Metric::OracleExcessRisk,
    };
    if metric == Metric::Accuracy && raw.as_ref().is_some_and(|ds| !ds.task.is_classification()) {
        return Err(Error::config("accuracy needs a classification dataset"));
    }
    let reps = plan.repetitions;
    let levels = &plan.corruption_levels;

    let prepared: Vec<std::result::Result<Prepared, String>> = (0..levels.len() * reps)
        .into_par_iter()
        .map(|i| prepare(plan, raw.as_ref(), metric, levels[i / reps], i / reps, i % reps).map_err(|e| e.to_string()))
        .collect();

    let n_algos = plan.algorithms.len();
    let outcomes: Vec<std::result::Result<Outcome, String>> = (0..levels.len() * n_algos * reps)
        .into_par_iter()
        .map(|t| {
            let (e, a, r) = (t / (n_algos * reps), (t / reps) % n_algos, t % reps);
            let data = prepared[e * reps + r].as_ref().map_err(|s| s.clone())?;
            let seed = substream_seed(substream_seed(plan.seed, r as u64), 1000 + a as u64);
            run_task(plan, metric, &plan.algorithms[a], data, seed).map_err(|e| e.to_string())
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len() + levels.len() * n_algos);
    for (e, &eta) in levels.iter().enumerate() {
        for (a, algo) in plan.algorithms.iter().enumerate() {
            let name = algo.label();
            let mut values = Vec::new();
            let mut total_ns = 0;
            for r in 0..reps {
                let base = json!({"record": "evaluation", "name": name, "eta": eta, "rep": r, "cycles": plan.cycles});
                let mut rec = Record {
                    run_id: format!("{name}/eta{e}/rep{r}"),
                    algo: algo.solver.name().into(),
                    estimator: algo.estimator.name().into(),
                    params: base,
                    cycle: Some(plan.cycles),
                    metric_name: metric.name().into(),
                    metric_value: None,
                    elapsed_ns: 0,
                    seed: plan.seed,
                };
                match &outcomes[(e * n_algos + a) * reps + r] {
                    Ok(o) => {
                        rec.params["hyper"] = o.hyper.clone();
                        rec.params["val_metric"] = json!(finite(o.val_metric));
                        rec.metric_value = finite(o.test_metric);
                        rec.elapsed_ns = o.elapsed_ns;
                        rec.seed = o.seed;
                        total_ns += o.elapsed_ns;
                        values.push(o.test_metric);
                    }
                    Err(msg) => {
                        rec.params["record"] = json!("error");
                        rec.params["error"] = json!(msg);
                    }
                }
                records.push(rec);
            }
            let failed = reps - values.len();
            let med = if values.is_empty() { None } else { median(&values).ok().and_then(finite) };
            records.push(Record {
                run_id: format!("{name}/eta{e}/median"),
                algo: algo.solver.name().into(),
                estimator: algo.estimator.name().into(),
                params: json!({"record": "summary", "name": name, "eta": eta, "repetitions": reps, "failed": failed}),
                cycle: Some(plan.cycles),
                metric_name: metric.name().into(),
                metric_value: med,
                elapsed_ns: total_ns,
                seed: plan.seed,
            });
        }
    }
    Ok(records)
}
