use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};

use robustcgd::data::{save_csv, write_ndjson};
use robustcgd::datagen::{corrupt_dataset, simulate as draw, CorruptionSpec, Mechanism, Noise, Setting, SimSpec, STUDENT_DF};
use robustcgd::harness::{run_bench, time_estimators as time_all, BenchPlan, SampleDistribution, TimingPlan};

use crate::fit::parse_eta;
use crate::{output, usage, CliResult, CsvArgs};

#[derive(Args)]
pub struct BenchArgs {
    /// JSON benchmark plan.
    #[arg(long)]
    plan: PathBuf,
    /// NDJSON output; overrides the plan's output path. Stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    cycles: Option<usize>,
}

pub fn bench(args: BenchArgs) -> CliResult {
    let f = File::open(&args.plan).with_context(|| args.plan.display().to_string())?;
    let mut plan: BenchPlan =
        serde_json::from_reader(BufReader::new(f)).map_err(|e| usage(format!("{}: {e}", args.plan.display())))?;
    if let Some(s) = args.seed {
        plan.seed = s;
    }
    if let Some(r) = args.repetitions {
        plan.repetitions = r;
    }
    if let Some(c) = args.cycles {
        plan.cycles = c;
    }
    if args.out.is_some() {
        plan.output = args.out;
    }
    plan.validate()?;
    let records = run_bench(&plan)?;
    let failed = records.iter().filter(|r| r.params["record"] == "error").count();
    if failed > 0 {
        eprintln!("{failed} runs failed; see the error records");
    }
    write_ndjson(output(plan.output.as_deref())?, &records)?;
    Ok(())
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    s.parse::<Setting>().map_err(|_| format!("unknown setting '{s}', expected one of a, b, c, d, e, f"))
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    StudentT,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_setting)]
    setting: Setting,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Outlier fraction for settings c to f.
    #[arg(long, default_value_t = 0.01, value_parser = parse_eta)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise law; Gaussian is only allowed in setting a.
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    /// Noise scale (standard deviation for Gaussian noise).
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long, default_value = "simulated.csv")]
    out: PathBuf,
    #[arg(long, default_value = "oracle.json")]
    oracle_out: PathBuf,
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let mut spec = SimSpec::new(args.setting, args.n, args.d, args.seed);
    spec.corruption_rate = args.eta;
    let scale = args.noise_scale.unwrap_or(1.0);
    if !(scale > 0.0) {
        return Err(usage("noise scale must be positive"));
    }
    spec.noise = match args.noise {
        Some(NoiseArg::Gaussian) => Some(Noise::Gaussian { sigma: scale }),
        Some(NoiseArg::StudentT) => Some(Noise::StudentT { nu: STUDENT_DF, scale }),
        None if args.noise_scale.is_some() => Some(match spec.noise() {
            Noise::Gaussian { .. } => Noise::Gaussian { sigma: scale },
            Noise::StudentT { nu, .. } => Noise::StudentT { nu, scale },
        }),
        None => None,
    };
    if args.n == 0 || args.d == 0 {
        return Err(usage("--n and --d must be positive"));
    }
    if args.setting != Setting::A && matches!(spec.noise, Some(Noise::Gaussian { .. })) {
        return Err(usage("settings b to f use Student noise"));
    }
    let (ds, oracle) = draw(&spec)?;
    save_csv(&ds, &args.out).with_context(|| args.out.display().to_string())?;
    let mut w = output(Some(&args.oracle_out))?;
    serde_json::to_writer_pretty(&mut w, &oracle)?;
    w.write_all(b"\n")?;
    w.flush()?;
    eprintln!("{} rows, {} outliers", ds.n_samples(), oracle.outliers.len());
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Mixed,
    HeavyTail,
    Direction,
    Sphere,
}

#[derive(Args)]
pub struct CorruptArgs {
    #[command(flatten)]
    csv: CsvArgs,
    #[arg(long, value_parser = parse_eta)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MechanismArg::Mixed)]
    mechanism: MechanismArg,
    #[arg(long)]
    out: PathBuf,
    /// JSON file listing the replaced row indices.
    #[arg(long)]
    outliers_out: Option<PathBuf>,
}

pub fn corrupt(args: CorruptArgs) -> CliResult {
    let ds = args.csv.load()?;
    let mechanism = match args.mechanism {
        MechanismArg::Mixed => Mechanism::Mixed,
        MechanismArg::HeavyTail => Mechanism::HeavyTail,
        MechanismArg::Direction => Mechanism::Direction,
        MechanismArg::Sphere => Mechanism::Sphere,
    };
    let c = corrupt_dataset(&ds, &CorruptionSpec { rate: args.eta, seed: args.seed, mechanism })?;
    save_csv(&c.dataset, &args.out).with_context(|| args.out.display().to_string())?;
    if let Some(p) = &args.outliers_out {
        let mut w = output(Some(p))?;
        serde_json::to_writer(&mut w, &c.outliers)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    eprintln!("replaced {} of {} rows", c.outliers.len(), ds.n_samples());
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum DistributionArg {
    StudentT,
    Gaussian,
}

#[derive(Args)]
pub struct TimeArgs {
    /// Ascending comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000,1000000")]
    n_grid: Vec<usize>,
    #[arg(long, value_enum, default_value_t = DistributionArg::StudentT)]
    distribution: DistributionArg,
    /// Degrees of freedom of the Student distribution.
    #[arg(long, default_value_t = STUDENT_DF)]
    nu: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// NDJSON output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn time_estimators(args: TimeArgs) -> CliResult {
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(usage("delta must be in (0, 1)"));
    }
    if !(args.nu > 0.0) {
        return Err(usage("nu must be positive"));
    }
    let plan = TimingPlan {
        n_grid: args.n_grid,
        reps: args.reps,
        warmup: args.warmup,
        distribution: match args.distribution {
            DistributionArg::StudentT => SampleDistribution::StudentT { nu: args.nu },
            DistributionArg::Gaussian => SampleDistribution::Gaussian,
        },
        delta: args.delta,
        seed: args.seed,
    };
    let records = time_all(&plan)?;
    write_ndjson(output(args.out.as_deref())?, &records)?;
    Ok(())
}
