//! `robustcgd` command-line interface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod fit;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "robustcgd", version, about = "Robust coordinate gradient descent for linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on a CSV file.
    Fit(fit::FitArgs),
    /// Predict with a saved model.
    Predict(fit::PredictArgs),
    /// Run a corruption benchmark described by a JSON plan.
    Bench(commands::BenchArgs),
    /// Draw a synthetic regression dataset.
    Simulate(commands::SimulateArgs),
    /// Replace a fraction of the rows of a CSV file by outliers.
    Corrupt(commands::CorruptArgs),
    /// Time the four mean estimators over a range of sample sizes.
    TimeEstimators(commands::TimeArgs),
}

/// A failure before any work was done (exit 2) or while doing it (exit 1).
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<robustcgd::Error>() {
            Some(robustcgd::Error::Config(msg)) => Failure::Usage(msg.clone()),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<robustcgd::Error> for Failure {
    fn from(e: robustcgd::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub type CliResult<T = ()> = std::result::Result<T, Failure>;

#[derive(Args, Clone)]
pub struct CsvArgs {
    /// Input CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the label column.
    #[arg(long)]
    pub label: String,
    #[arg(long, value_enum, default_value_t = TaskArg::Auto)]
    pub task: TaskArg,
    /// Comma-separated columns to treat as categorical.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
}

impl CsvArgs {
    pub fn load(&self) -> anyhow::Result<robustcgd::data::Dataset> {
        let opts = robustcgd::data::CsvOptions {
            label: robustcgd::data::LabelColumn::Name(self.label.clone()),
            task: self.task.into(),
            categorical: self.categorical.clone(),
        };
        let report = robustcgd::data::load_csv(&self.data, &opts)
            .map_err(|e| anyhow::anyhow!("{}: {e}", self.data.display()))?;
        if report.dropped_rows > 0 {
            eprintln!("dropped {} rows with missing values", report.dropped_rows);
        }
        Ok(report.dataset)
    }
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskArg {
    Auto,
    Regression,
    Classification,
}

impl From<TaskArg> for robustcgd::data::TaskHint {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Auto => robustcgd::data::TaskHint::Auto,
            TaskArg::Regression => robustcgd::data::TaskHint::Regression,
            TaskArg::Classification => robustcgd::data::TaskHint::Classification,
        }
    }
}

/// Writer for `path`, or stdout when absent.
pub fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> CliResult {
    robustcgd::harness::configure_threads()?;
    match cli.command {
        Command::Fit(a) => fit::fit(a),
        Command::Predict(a) => fit::predict(a),
        Command::Bench(a) => commands::bench(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Corrupt(a) => commands::corrupt(a),
        Command::TimeEstimators(a) => commands::time_estimators(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
