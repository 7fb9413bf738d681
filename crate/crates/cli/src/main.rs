//! `drfd`: batch front-end for distributionally robust fault detection.
//!
//! Every subcommand accepts `--config <file.json>` holding any subset of its
//! flags (snake_case keys); explicit flags override the file. `DRFD_SEED`
//! overrides all seeds. Exit codes: 0 success, 2 usage or I/O error,
//! 3 solver failure or infeasibility, 4 internal invariant violation.

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drfd::sysmodel::DisturbanceFamily;
use drfd::{Alpha, Metric, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "drfd", version, about = "Distributionally robust fault detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Worst-case false-alarm bound of an ellipsoidal acceptance region.
    Bound(BoundArgs),
    /// Residual-generator design for one scheme and metric, or an epsilon sweep.
    Design(DesignArgs),
    /// Safe alarm threshold for a quadratic statistic.
    Threshold(ThresholdArgs),
    /// Generate the synthetic three-tank benchmark and fit its ambiguity set.
    Simulate(SimulateArgs),
    /// FAR/FDR table of designs on a labeled residual dataset.
    Eval(EvalArgs),
    /// Full benchmark pipeline: objective sweeps, FAR/FDR tables, figures.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum SchemeArg {
    #[value(name = "dr-u")]
    #[serde(rename = "dr-u")]
    DrU,
    #[value(name = "dr-u-a")]
    #[serde(rename = "dr-u-a")]
    DrUA,
    #[value(name = "dr-b")]
    #[serde(rename = "dr-b")]
    DrB,
    #[value(name = "dr-b-a")]
    #[serde(rename = "dr-b-a")]
    DrBA,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::DrU => Scheme::DrU,
            SchemeArg::DrUA => Scheme::DrUAlpha,
            SchemeArg::DrB => Scheme::DrB,
            SchemeArg::DrBA => Scheme::DrBAlpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Rho1,
    Rho2,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Rho1 => Metric::Frobenius,
            MetricArg::Rho2 => Metric::PseudoDet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMethod {
    /// Closed form without support, support-aware SDP with one.
    Auto,
    Chebyshev,
    Gauss,
    Sdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSweep {
    Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignSweep {
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    Gaussian,
    ScaleMixture,
    Laplace,
    Uniform,
}

impl From<FamilyArg> for DisturbanceFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => DisturbanceFamily::Gaussian,
            FamilyArg::ScaleMixture => DisturbanceFamily::ScaleMixture,
            FamilyArg::Laplace => DisturbanceFamily::Laplace,
            FamilyArg::Uniform => DisturbanceFamily::Uniform,
        }
    }
}

/// Ambiguity-set inputs shared by `bound`, `design` and `threshold`: either
/// a full set in JSON, or `S0` plus size parameters and an optional support.
pub struct AmbiguityInputs<'a> {
    pub ambiguity: Option<&'a PathBuf>,
    pub s0: Option<&'a PathBuf>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub alpha: Option<Alpha>,
    pub support: Option<&'a PathBuf>,
    pub box_half_widths: &'a [f64],
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundArgs {
    /// Acceptance-region matrix M (CSV); the region is {xi : xi^T M xi <= 1}.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<PathBuf>,
    /// Full ambiguity set (JSON); excludes --S0/--gamma1/--gamma2/--support/--box.
    #[arg(long)]
    pub ambiguity: Option<PathBuf>,
    /// Nominal covariance S0 (CSV).
    #[arg(long = "S0")]
    #[serde(rename = "S0")]
    pub s0: Option<PathBuf>,
    /// Mean-deviation size (default 0).
    #[arg(long)]
    pub gamma1: Option<f64>,
    /// Covariance size (default 1).
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Unimodality degree, a positive number or `inf` (default inf).
    #[arg(long)]
    pub alpha: Option<Alpha>,
    /// Support set (JSON list of ellipsoids).
    #[arg(long)]
    pub support: Option<PathBuf>,
    /// Centered box support given by its half-widths.
    #[arg(long = "box", value_delimiter = ',')]
    #[serde(rename = "box")]
    pub box_half_widths: Vec<f64>,
    #[arg(long, value_enum)]
    pub method: Option<BoundMethod>,
    /// Linearization point (closed-form `gauss` at a fixed tau0, or the SDP).
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Sweep the unimodality degree instead of computing one bound.
    #[arg(long, value_enum)]
    pub sweep: Option<BoundSweep>,
    /// Alpha values: `a:b` (41 log-spaced points), `a:b:n`, or a comma list.
    #[arg(long)]
    pub alphas: Option<String>,
    /// Output file (JSON, or CSV for sweeps); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG chart of a sweep.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Write the bound SDP in block-matrix text form.
    #[arg(long)]
    pub dump_sdp: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignArgs {
    /// Disturbance-to-residual matrix W (CSV); identity when absent.
    #[arg(long = "W")]
    #[serde(rename = "W")]
    pub w: Option<PathBuf>,
    /// Fault-to-residual matrix V (CSV).
    #[arg(long = "V")]
    #[serde(rename = "V")]
    pub v: Option<PathBuf>,
    #[arg(long)]
    pub ambiguity: Option<PathBuf>,
    #[arg(long = "S0")]
    #[serde(rename = "S0")]
    pub s0: Option<PathBuf>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub alpha: Option<Alpha>,
    #[arg(long)]
    pub support: Option<PathBuf>,
    #[arg(long = "box", value_delimiter = ',')]
    #[serde(rename = "box")]
    pub box_half_widths: Vec<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Detectability metric (default rho1).
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// False-alarm tolerance.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of tau0 grid points for the bounded schemes (default 15).
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Grid spans [d/span, d*span] around the default tau0 (default 4).
    #[arg(long)]
    pub grid_span: Option<f64>,
    /// Sweep epsilon over all four schemes.
    #[arg(long, value_enum)]
    pub sweep: Option<DesignSweep>,
    /// Epsilon values of a sweep (default 0.01,0.02,0.05,0.1,0.2).
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Write the design SDP at the center of the tau0 grid.
    #[arg(long)]
    pub dump_sdp: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdArgs {
    /// Statistic matrix M (CSV); the alarm is xi^T M xi > J_th.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<PathBuf>,
    #[arg(long)]
    pub ambiguity: Option<PathBuf>,
    #[arg(long = "S0")]
    #[serde(rename = "S0")]
    pub s0: Option<PathBuf>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub alpha: Option<Alpha>,
    #[arg(long)]
    pub support: Option<PathBuf>,
    #[arg(long = "box", value_delimiter = ',')]
    #[serde(rename = "box")]
    pub box_half_widths: Vec<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dump_sdp: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Benchmark and ambiguity-fit parameters shared by `simulate` and `sweep`.
#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Benchmark seed (default 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fault-free training samples (default 2000).
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Test samples (default 1000).
    #[arg(long)]
    pub n_test: Option<usize>,
    /// First faulty test sample (default 200).
    #[arg(long)]
    pub fault_onset: Option<usize>,
    /// Leak magnitude (default 0.2).
    #[arg(long)]
    pub fault_magnitude: Option<f64>,
    /// Disturbance law (default scale-mixture).
    #[arg(long, value_enum)]
    pub disturbance_family: Option<FamilyArg>,
    /// Parity order (default 6).
    #[arg(long)]
    pub s: Option<usize>,
    /// Keep this many parity directions (default all).
    #[arg(long)]
    pub residual_dim: Option<usize>,
    /// Unimodality degree of the fitted set (default: residual dimension).
    #[arg(long)]
    pub alpha: Option<Alpha>,
    /// Bootstrap confidence (default 0.95).
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Bootstrap resamples (default 500).
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Bootstrap seed (default 7).
    #[arg(long)]
    pub bootstrap_seed: Option<u64>,
    /// Box support inflation over the sample extremes (default 1.2).
    #[arg(long)]
    pub box_inflation: Option<f64>,
    /// Fit without a support set.
    #[arg(long)]
    pub unbounded: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalArgs {
    /// Labeled residual dataset (CSV with columns k, v1.., label).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Design result JSON files; repeat or separate with commas.
    #[arg(long = "design", value_delimiter = ',')]
    #[serde(rename = "design")]
    pub designs: Vec<PathBuf>,
    /// Alarm threshold on ||P r||^2 (default 1).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Add the chi-square thresholded GLRT baseline (needs --V, --ambiguity, --epsilon).
    #[arg(long)]
    pub glrt: bool,
    #[arg(long = "W")]
    #[serde(rename = "W")]
    pub w: Option<PathBuf>,
    #[arg(long = "V")]
    #[serde(rename = "V")]
    pub v: Option<PathBuf>,
    #[arg(long)]
    pub ambiguity: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Table CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub fault_onset: Option<usize>,
    #[arg(long)]
    pub fault_magnitude: Option<f64>,
    #[arg(long, value_enum)]
    pub disturbance_family: Option<FamilyArg>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub residual_dim: Option<usize>,
    #[arg(long)]
    pub alpha: Option<Alpha>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub bootstrap_seed: Option<u64>,
    #[arg(long)]
    pub box_inflation: Option<f64>,
    /// Epsilon values of the objective sweep (default 0.01,0.02,0.05,0.1,0.2).
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Vec<f64>,
    /// Tolerance of the FAR/FDR tables (default 0.05).
    #[arg(long)]
    pub eval_epsilon: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Also write SVG charts.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl SweepArgs {
    pub fn benchmark(&self) -> SimulateArgs {
        SimulateArgs {
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            n_train: self.n_train,
            n_test: self.n_test,
            fault_onset: self.fault_onset,
            fault_magnitude: self.fault_magnitude,
            disturbance_family: self.disturbance_family,
            s: self.s,
            residual_dim: self.residual_dim,
            alpha: self.alpha,
            confidence: self.confidence,
            resamples: self.resamples,
            bootstrap_seed: self.bootstrap_seed,
            box_inflation: self.box_inflation,
            unbounded: false,
            config: None,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bound(a) => {
            let a = config::resolve(&a, a.config.as_deref())?;
            commands::bound(&a)
        }
        Command::Design(a) => {
            let a = config::resolve(&a, a.config.as_deref())?;
            commands::design(&a)
        }
        Command::Threshold(a) => {
            let a = config::resolve(&a, a.config.as_deref())?;
            commands::threshold(&a)
        }
        Command::Simulate(a) => {
            let mut a = config::resolve(&a, a.config.as_deref())?;
            if let Some(seed) = config::seed_override()? {
                a.seed = Some(seed);
                a.bootstrap_seed = Some(seed);
            }
            commands::simulate(&a)
        }
        Command::Eval(a) => {
            let a = config::resolve(&a, a.config.as_deref())?;
            commands::eval(&a)
        }
        Command::Sweep(a) => {
            let mut a = config::resolve(&a, a.config.as_deref())?;
            if let Some(seed) = config::seed_override()? {
                a.seed = Some(seed);
                a.bootstrap_seed = Some(seed);
            }
            commands::sweep(&a)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
