use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use robustcgd::data::{read_table, write_ndjson, Preprocessor, Record, Task};
use robustcgd::grad::VecEstimator;
use robustcgd::harness::blocks_for;
use robustcgd::robust::{blocks_from_confidence, tm_eps_from_confidence};
use robustcgd::solver::{cgd_fit, gd_fit, Diagnostics, GdConfig, LinearModel, Sampling, SolverConfig, StepSize};
use robustcgd::{EstimatorSpec, Loss};

use crate::{output, usage, CliResult, CsvArgs};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossArg {
    Square,
    Huber,
    Logistic,
    Multiclass,
    Lad,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverArg {
    Cgd,
    Gd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorArg {
    Erm,
    Mom,
    Tm,
    Ch,
    Gmom,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingArg {
    Uniform,
    Importance,
    Cyclic,
}

impl From<SamplingArg> for Sampling {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::Uniform => Sampling::Uniform,
            SamplingArg::Importance => Sampling::Importance,
            SamplingArg::Cyclic => Sampling::Cyclic,
        }
    }
}

fn in_range(s: &str, ok: impl Fn(f64) -> bool, msg: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if ok(v) {
        Ok(v)
    } else {
        Err(msg.to_string())
    }
}

const TRIM_MSG: &str = "trim must be in [0, 0.5)";
const BLOCK_SIZE_MSG: &str = "block size must be in (0, 1]";
const DELTA_MSG: &str = "delta must be in (0, 1)";
const ETA_MSG: &str = "eta must be in [0, 0.5)";

pub fn parse_trim(s: &str) -> Result<f64, String> {
    in_range(s, |v| (0.0..0.5).contains(&v), TRIM_MSG)
}

pub fn parse_block_size(s: &str) -> Result<f64, String> {
    in_range(s, |v| v > 0.0 && v <= 1.0, BLOCK_SIZE_MSG)
}

pub fn parse_delta(s: &str) -> Result<f64, String> {
    in_range(s, |v| v > 0.0 && v < 1.0, DELTA_MSG)
}

pub fn parse_eta(s: &str) -> Result<f64, String> {
    in_range(s, |v| (0.0..0.5).contains(&v), ETA_MSG)
}

/// Training settings. Every field can come from `--config`; flags win.
#[derive(Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Huber threshold.
    #[arg(long)]
    huber_tau: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    /// MOM/GMOM block size K/n; defaults to K = ceil(18 ln(1/delta)).
    #[arg(long, value_parser = parse_block_size)]
    block_size: Option<f64>,
    /// Explicit MOM/GMOM block count; takes precedence over --block-size.
    #[arg(long)]
    blocks: Option<usize>,
    /// Trimming level; defaults to 8 eta + 12 ln(4/delta)/n.
    #[arg(long, value_parser = parse_trim)]
    trim: Option<f64>,
    /// Confidence level for CH and for the MOM/TM defaults.
    #[arg(long, value_parser = parse_delta)]
    delta: Option<f64>,
    /// Assumed corruption rate, used by the default trimming level.
    #[arg(long, value_parser = parse_eta)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    sampling: Option<SamplingArg>,
    /// CGD cycles or GD iterations.
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// GD step size.
    #[arg(long)]
    step: Option<f64>,
    /// Moment-ratio constant of the step-size bound; 0 uses the plain MOM
    /// estimate of E[x_j^2].
    #[arg(long)]
    moment_ratio: Option<f64>,
    /// Do not fit an intercept.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_intercept: Option<bool>,
    /// Standardize regression labels (predictions are mapped back).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    scale_labels: Option<bool>,
}

macro_rules! merge {
    ($flags:expr, $file:expr, $($f:ident),*) => {
        FitSettings { $($f: $flags.$f.or($file.$f)),* }
    };
}

impl FitSettings {
    fn merged(self, file: FitSettings) -> FitSettings {
        merge!(
            self, file, loss, huber_tau, solver, estimator, block_size, blocks, trim, delta, eta, sampling, cycles,
            seed, step, moment_ratio, no_intercept, scale_labels
        )
    }

    /// Range checks for values that may have come from a config file.
    fn validate(&self) -> CliResult {
        let bad = |v: Option<f64>, f: fn(&str) -> Result<f64, String>| -> CliResult {
            match v {
                Some(v) => f(&v.to_string()).map(|_| ()).map_err(usage),
                None => Ok(()),
            }
        };
        bad(self.trim, parse_trim)?;
        bad(self.block_size, parse_block_size)?;
        bad(self.delta, parse_delta)?;
        bad(self.eta, parse_eta)?;
        if self.blocks == Some(0) {
            return Err(usage("blocks must be at least 1"));
        }
        if let Some(t) = self.huber_tau {
            if !(t > 0.0) {
                return Err(usage("huber tau must be positive"));
            }
        }
        if let Some(s) = self.step {
            if !(s > 0.0) {
                return Err(usage("step must be positive"));
            }
        }
        if self.moment_ratio.is_some_and(|c| !(c >= 0.0)) {
            return Err(usage("moment ratio must be nonnegative"));
        }
        let solver = self.solver.unwrap_or(SolverArg::Cgd);
        if self.estimator == Some(EstimatorArg::Gmom) && solver == SolverArg::Cgd {
            return Err(usage("the gmom estimator needs --solver gd"));
        }
        if self.step.is_some() && solver == SolverArg::Cgd {
            return Err(usage("--step applies to the gd solver only"));
        }
        Ok(())
    }
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    csv: CsvArgs,
    #[command(flatten)]
    settings: FitSettings,
    /// JSON file with default settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "model.json")]
    model_out: PathBuf,
    #[arg(long, default_value = "trace.ndjson")]
    trace_out: PathBuf,
}

/// Everything `predict` needs to replay a fit.
#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub model: LinearModel,
    pub preprocessor: Preprocessor,
    pub label: String,
    pub settings: serde_json::Value,
    pub diagnostics: Diagnostics,
}

fn resolve_loss(arg: Option<LossArg>, tau: f64, task: Task) -> CliResult<Loss> {
    let loss = match (arg, task) {
        (None, Task::Regression) | (Some(LossArg::Square), _) => Loss::Square,
        (None, Task::Binary) | (Some(LossArg::Logistic), _) => Loss::Logistic,
        (None, Task::Multiclass { k }) => Loss::MulticlassLogistic { k },
        (Some(LossArg::Multiclass), t) => match t.n_classes() {
            Some(k) => Loss::MulticlassLogistic { k },
            None => return Err(usage("the multiclass loss needs a classification label")),
        },
        (Some(LossArg::Huber), _) => Loss::huber(tau)?,
        (Some(LossArg::Lad), _) => Loss::Lad,
    };
    let regression_loss = !matches!(loss, Loss::Logistic | Loss::MulticlassLogistic { .. });
    if regression_loss == task.is_classification() {
        return Err(usage(format!("the {} loss does not match the label column", loss.name())));
    }
    if loss == Loss::Logistic && task != Task::Binary {
        return Err(usage("the logistic loss needs exactly two classes"));
    }
    Ok(loss)
}

pub fn fit(args: FitArgs) -> CliResult {
    let file = match &args.config {
        Some(p) => {
            let f = File::open(p).with_context(|| p.display().to_string())?;
            serde_json::from_reader(BufReader::new(f)).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => FitSettings::default(),
    };
    let s = args.settings.merged(file);
    s.validate()?;

    let raw = args.csv.load()?;
    let loss = resolve_loss(s.loss, s.huber_tau.unwrap_or(1.35), raw.task)?;
    let mut pre = Preprocessor::fit(&raw);
    if s.scale_labels.unwrap_or(false) {
        pre = pre.with_label_scaling(&raw);
    }
    let ds = pre.transform(&raw)?;
    let n = ds.n_samples();

    let delta = s.delta.unwrap_or(0.01);
    let blocks = || -> CliResult<usize> {
        let k = match (s.blocks, s.block_size) {
            (Some(k), _) => k,
            (None, Some(bs)) => blocks_for(bs, n),
            (None, None) => blocks_from_confidence(delta)?.min(n),
        };
        if k > n {
            return Err(usage(format!("{k} blocks exceed the {n} samples")));
        }
        Ok(k)
    };
    let estimator = s.estimator.unwrap_or(EstimatorArg::Erm);
    let scalar = match estimator {
        EstimatorArg::Erm | EstimatorArg::Gmom => EstimatorSpec::Erm,
        EstimatorArg::Mom => EstimatorSpec::Mom { blocks: blocks()? },
        EstimatorArg::Tm => EstimatorSpec::Tm {
            trim: match s.trim {
                Some(t) => t,
                None => tm_eps_from_confidence(delta, s.eta.unwrap_or(0.0), n)?.eps,
            },
        },
        EstimatorArg::Ch => EstimatorSpec::ch(delta),
    };
    let seed = s.seed.unwrap_or(0);
    let cycles = s.cycles.unwrap_or(100);
    let fit_intercept = !s.no_intercept.unwrap_or(false);
    let solver = s.solver.unwrap_or(SolverArg::Cgd);

    let (result, est_json) = match solver {
        SolverArg::Cgd => {
            let cfg = SolverConfig {
                sampling: s.sampling.unwrap_or(SamplingArg::Uniform).into(),
                estimator: scalar,
                max_cycles: cycles,
                step_size: StepSize::EstimatedMom { delta, ratio_constant: s.moment_ratio.unwrap_or(1.0), alpha: 1.0 },
                seed,
                fit_intercept,
                ..SolverConfig::default()
            };
            (cgd_fit(&ds.features, &ds.labels, loss, &cfg)?, json!(scalar))
        }
        SolverArg::Gd => {
            let vec = match estimator {
                EstimatorArg::Erm => VecEstimator::Erm,
                EstimatorArg::Gmom => VecEstimator::Gmom { blocks: blocks()? },
                _ => VecEstimator::Coordwise { estimator: scalar },
            };
            let cfg = GdConfig { estimator: vec, step: s.step, max_iters: cycles, seed, fit_intercept, ..GdConfig::default() };
            (gd_fit(&ds.features, &ds.labels, loss, &cfg)?, json!(vec))
        }
    };
    let d = &result.record.diagnostics;
    if d.ch_unconverged > 0 {
        eprintln!("warning: {} CH estimates hit the iteration cap", d.ch_unconverged);
    }
    if !d.degenerate_columns.is_empty() {
        eprintln!("warning: constant columns {:?}", d.degenerate_columns);
    }

    let mut model = result.model;
    model.feature_names = pre.output_names();
    model.classes = raw.classes.clone();
    let settings = json!({
        "solver": solver,
        "estimator": est_json,
        "loss": loss,
        "cycles": cycles,
        "seed": seed,
        "fit_intercept": fit_intercept,
        "sampling": s.sampling.unwrap_or(SamplingArg::Uniform),
    });
    let trace: Vec<Record> = result
        .record
        .cycles
        .iter()
        .map(|c| Record {
            run_id: "fit".into(),
            algo: match solver {
                SolverArg::Cgd => "cgd".into(),
                SolverArg::Gd => "gd".into(),
            },
            estimator: est_json["kind"].as_str().unwrap_or("erm").into(),
            params: json!({"loss": loss.name(), "n": n}),
            cycle: Some(c.cycle),
            metric_name: "objective".into(),
            metric_value: c.objective.filter(|v| v.is_finite()),
            elapsed_ns: c.elapsed_ns,
            seed,
        })
        .collect();
    let out = ModelFile {
        model,
        preprocessor: pre,
        label: raw.label_name.clone(),
        settings,
        diagnostics: result.record.diagnostics,
    };
    let mut w = output(Some(&args.model_out))?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    w.write_all(b"\n")?;
    w.flush()?;
    write_ndjson(output(Some(&args.trace_out))?, &trace)?;
    if let Some(obj) = trace.last().and_then(|r| r.metric_value) {
        eprintln!("final objective {obj:.6e} after {cycles} cycles");
    }
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with the training feature columns (extra columns are ignored).
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn predict(args: PredictArgs) -> CliResult {
    let f = File::open(&args.model).with_context(|| args.model.display().to_string())?;
    let mf: ModelFile = serde_json::from_reader(BufReader::new(f)).context("reading the model file")?;
    let f = File::open(&args.data).with_context(|| args.data.display().to_string())?;
    let table = read_table(BufReader::new(f))?;
    let x = mf.preprocessor.transform_table(&table)?;
    let pred = mf.model.predict(&x)?;
    let classes = &mf.model.classes;
    let mut w = output(args.out.as_deref())?;
    writeln!(w, "{}", mf.label)?;
    for p in pred {
        let cell = match mf.model.task() {
            Task::Regression => format!("{}", mf.preprocessor.unscale_label(p)),
            Task::Binary => classes.get(usize::from(p > 0.0)).cloned().unwrap_or_else(|| p.to_string()),
            Task::Multiclass { .. } => classes.get(p as usize).cloned().unwrap_or_else(|| p.to_string()),
        };
        writeln!(w, "{cell}")?;
    }
    w.flush()?;
    Ok(())
}
