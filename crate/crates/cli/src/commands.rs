//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use drfd::ambiguity::{self, FitOptions};
use drfd::bounds::{self, BoundResult, EllipsoidRegion};
use drfd::design::{self, DesignOptions, DesignResult};
use drfd::linalg;
use drfd::sysmodel::{self, Benchmark, BenchmarkConfig, LabeledData};
use drfd::verify;
use drfd::{Alpha, AmbiguitySet, Metric, Scheme, SupportSet, SymMatrix};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::CliError;
use crate::svg::{Chart, Series};
use crate::{
    AmbiguityInputs, BoundArgs, BoundMethod, BoundSweep, DesignArgs, DesignSweep, EvalArgs, MetricArg, SimulateArgs,
    SweepArgs, ThresholdArgs,
};

const DEFAULT_EPSILONS: [f64; 5] = [0.01, 0.02, 0.05, 0.1, 0.2];
/// Slack on certified false-alarm rates before a result counts as broken.
const FAR_SLACK: f64 = 1e-6;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| usage(format!("{flag} is required")))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    if !path.exists() {
        return Err(CliError::io(path, "no such file"));
    }
    Ok(linalg::read_matrix_csv(path)?)
}

fn read_sym(path: &Path) -> Result<SymMatrix, CliError> {
    SymMatrix::new(read_matrix(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => say(text),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Invariant(format!("serialization: {e}")))
}

fn out_dir(dir: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = required(dir, "--out-dir")?.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Ambiguity set from a JSON file (with an optional alpha override) or from
/// `S0` and size parameters.
pub fn build_ambiguity(inp: &AmbiguityInputs<'_>) -> Result<AmbiguitySet, CliError> {
    if let Some(path) = inp.ambiguity {
        if inp.s0.is_some()
            || inp.gamma1.is_some()
            || inp.gamma2.is_some()
            || inp.support.is_some()
            || !inp.box_half_widths.is_empty()
        {
            return Err(usage(
                "--ambiguity excludes --S0, --gamma1, --gamma2, --support and --box",
            ));
        }
        let set = AmbiguitySet::from_json(&read_text(path)?)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        return match inp.alpha {
            Some(a) => Ok(set.with_alpha(a)?),
            None => Ok(set),
        };
    }
    let s0 = read_sym(required(&inp.s0, "--S0 (or --ambiguity)")?)?;
    let support = match (inp.support, inp.box_half_widths.is_empty()) {
        (Some(_), false) => return Err(usage("--support and --box are exclusive")),
        (Some(path), true) => serde_json::from_str::<SupportSet>(&read_text(path)?)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?,
        (None, false) => SupportSet::centered_box(inp.box_half_widths)?,
        (None, true) => SupportSet::unbounded(),
    };
    Ok(AmbiguitySet::new(
        s0,
        inp.gamma1.unwrap_or(0.0),
        inp.gamma2.unwrap_or(1.0),
        inp.alpha.unwrap_or(Alpha::Infinite),
        support,
    )?)
}

fn check_probability(what: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("{what} = {v} is not a probability")))
    }
}

fn compute_bound(
    region: &EllipsoidRegion,
    amb: &AmbiguitySet,
    method: BoundMethod,
    tau0: Option<f64>,
) -> Result<BoundResult, CliError> {
    let closed = |tau0: Option<f64>| match tau0 {
        Some(t) => bounds::gauss_bound_tau(region, amb, t),
        None => bounds::gauss_bound(region, amb),
    };
    let r = match method {
        BoundMethod::Chebyshev => bounds::chebyshev_bound(region, amb)?,
        BoundMethod::Gauss => closed(tau0)?,
        BoundMethod::Sdp => bounds::bounded_gauss_bound(region, amb, tau0)?,
        BoundMethod::Auto if amb.support().is_unbounded() => closed(tau0)?,
        BoundMethod::Auto => bounds::bounded_gauss_bound(region, amb, tau0)?,
    };
    check_probability("bound", r.value)?;
    Ok(r)
}

/// `a:b` gives 41 log-spaced points, `a:b:n` gives `n`, otherwise a comma
/// list. Endpoints are exact.
pub fn parse_alphas(list: &str) -> Result<Vec<f64>, CliError> {
    let bad = || usage(format!("bad alpha list `{list}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let values = if list.contains(':') {
        let parts: Vec<&str> = list.split(':').collect();
        let (lo, hi, n) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 41),
            [a, b, n] => (num(a)?, num(b)?, n.trim().parse::<usize>().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        if !(lo > 0.0 && hi >= lo) || n == 0 {
            return Err(bad());
        }
        let mut g = bounds::log_grid(lo, hi, n);
        g[0] = lo;
        if n > 1 {
            g[n - 1] = hi;
        }
        g
    } else {
        list.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

fn csv_row(cells: impl IntoIterator<Item = String>) -> String {
    let mut s = cells.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

pub fn bound(a: &BoundArgs) -> Result<(), CliError> {
    let inputs = AmbiguityInputs {
        ambiguity: a.ambiguity.as_ref(),
        s0: a.s0.as_ref(),
        gamma1: a.gamma1,
        gamma2: a.gamma2,
        alpha: a.alpha,
        support: a.support.as_ref(),
        box_half_widths: &a.box_half_widths,
    };
    if a.sweep == Some(BoundSweep::Alpha) {
        return bound_alpha_sweep(a, &inputs);
    }
    let m = read_sym(required(&a.m, "--M")?)?;
    let amb = build_ambiguity(&inputs)?;
    let region = EllipsoidRegion::new(m)?;
    if let Some(path) = &a.dump_sdp {
        let (p, _) = bounds::bound_sdp(&region, &amb, a.tau0)?;
        write_file(path, &p.dump())?;
    }
    let r = compute_bound(&region, &amb, a.method.unwrap_or(BoundMethod::Auto), a.tau0)?;
    emit(a.out.as_ref(), &to_json(&r)?)
}

fn bound_alpha_sweep(a: &BoundArgs, inputs: &AmbiguityInputs<'_>) -> Result<(), CliError> {
    let alphas = parse_alphas(a.alphas.as_deref().unwrap_or("1:1024"))?;
    // Without an instance, the classic one: |xi| > 2 at unit variance.
    let (region, amb) = match &a.m {
        Some(path) => (EllipsoidRegion::new(read_sym(path)?)?, build_ambiguity(inputs)?),
        None => (
            EllipsoidRegion::new(SymMatrix::from_diagonal(&[0.25]))?,
            AmbiguitySet::moments(SymMatrix::identity(1), 1.0, Alpha::Infinite)?,
        ),
    };
    let method = a.method.unwrap_or(BoundMethod::Auto);
    let mut csv = csv_row(["alpha", "c_alpha", "bound"].map(String::from));
    let mut c_series = Vec::new();
    let mut b_series = Vec::new();
    for &alpha in &alphas {
        let set = amb.with_alpha(Alpha::Finite(alpha))?;
        let c = bounds::improvement_factor(Alpha::Finite(alpha))?;
        let b = compute_bound(&region, &set, method, a.tau0)?.value;
        csv.push_str(&csv_row([alpha.to_string(), c.to_string(), b.to_string()]));
        c_series.push((alpha, c));
        b_series.push((alpha, b));
    }
    if let Some(path) = &a.svg {
        let chart = Chart {
            title: "Improvement factor and bound versus alpha",
            x_label: "alpha",
            y_label: "value",
            log_x: true,
        };
        let svg = chart.render(&[
            Series {
                name: "c_alpha".into(),
                points: c_series,
            },
            Series {
                name: "bound".into(),
                points: b_series,
            },
        ]);
        write_file(path, &svg)?;
    }
    emit(a.out.as_ref(), &csv)
}

fn check_design(r: &DesignResult) -> Result<(), CliError> {
    if !r.objective.is_finite() && r.metric == Metric::Frobenius {
        return Err(CliError::Invariant(format!("{} objective is {}", r.scheme, r.objective)));
    }
    check_probability("certified FAR", r.certified_far.value)?;
    if r.certified_far.value > r.epsilon + FAR_SLACK {
        return Err(CliError::Invariant(format!(
            "{} design certifies FAR {} above epsilon {}",
            r.scheme, r.certified_far.value, r.epsilon
        )));
    }
    Ok(())
}

/// Objectives of the four schemes (in [`Scheme::ALL`] order) per epsilon.
pub fn objective_rows(
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    metric: Metric,
    epsilons: &[f64],
    opts: &DesignOptions,
) -> Result<Vec<[f64; 4]>, CliError> {
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut row = [0.0; 4];
        for (slot, scheme) in row.iter_mut().zip(Scheme::ALL) {
            let r = design::design(scheme, metric, w, v, amb, eps, opts)?;
            check_design(&r)?;
            *slot = r.objective;
        }
        rows.push(row);
    }
    Ok(rows)
}

fn objective_csv(epsilons: &[f64], rows: &[[f64; 4]]) -> String {
    let mut csv = csv_row(std::iter::once("epsilon".to_string()).chain(Scheme::ALL.iter().map(|s| s.label().to_string())));
    for (eps, row) in epsilons.iter().zip(rows) {
        csv.push_str(&csv_row(std::iter::once(eps.to_string()).chain(row.iter().map(f64::to_string))));
    }
    csv
}

fn objective_svg(metric: Metric, epsilons: &[f64], rows: &[[f64; 4]]) -> String {
    let name = match metric {
        Metric::Frobenius => "rho1",
        Metric::PseudoDet => "rho2",
    };
    let series: Vec<Series> = Scheme::ALL
        .iter()
        .enumerate()
        .map(|(j, s)| Series {
            name: s.label().into(),
            points: epsilons.iter().zip(rows).map(|(&e, r)| (e, r[j])).collect(),
        })
        .collect();
    let title = format!("Optimal {name} versus epsilon");
    Chart {
        title: &title,
        x_label: "epsilon",
        y_label: name,
        log_x: true,
    }
    .render(&series)
}

fn epsilons_or_default(list: &[f64]) -> Result<Vec<f64>, CliError> {
    let eps = if list.is_empty() { DEFAULT_EPSILONS.to_vec() } else { list.to_vec() };
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(usage(format!("epsilon must lie in (0, 1), got {bad}")));
    }
    Ok(eps)
}

pub fn design(a: &DesignArgs) -> Result<(), CliError> {
    let v = read_matrix(required(&a.v, "--V")?)?;
    let w = match &a.w {
        Some(p) => read_matrix(p)?,
        None => DMatrix::identity(v.nrows(), v.nrows()),
    };
    let amb = build_ambiguity(&AmbiguityInputs {
        ambiguity: a.ambiguity.as_ref(),
        s0: a.s0.as_ref(),
        gamma1: a.gamma1,
        gamma2: a.gamma2,
        alpha: a.alpha,
        support: a.support.as_ref(),
        box_half_widths: &a.box_half_widths,
    })?;
    let opts = DesignOptions {
        grid_points: a.grid_points.unwrap_or(15),
        grid_span: a.grid_span.unwrap_or(4.0),
        ..DesignOptions::default()
    };
    if opts.grid_points == 0 || !(opts.grid_span >= 1.0) {
        return Err(usage("--grid-points must be positive and --grid-span >= 1"));
    }
    let metric: Metric = a.metric.unwrap_or(MetricArg::Rho1).into();
    if a.sweep == Some(DesignSweep::Epsilon) {
        let eps = epsilons_or_default(&a.epsilons)?;
        let rows = objective_rows(&w, &v, &amb, metric, &eps, &opts)?;
        if let Some(path) = &a.svg {
            write_file(path, &objective_svg(metric, &eps, &rows))?;
        }
        return emit(a.out.as_ref(), &objective_csv(&eps, &rows));
    }
    let scheme: Scheme = (*required(&a.scheme, "--scheme")?).into();
    let eps = *required(&a.epsilon, "--epsilon")?;
    if let Some(path) = &a.dump_sdp {
        let text = if scheme.bounded() {
            let set = scheme.ambiguity(&amb)?;
            let tau0 = design::default_design_tau0(&w, &v, &set, eps, metric)?;
            design::design_sdp(&w, &v, &set, eps, metric, tau0)?.dump()
        } else {
            format!("# {scheme} is a closed-form design; no SDP is solved\n")
        };
        write_file(path, &text)?;
    }
    let r = design::design(scheme, metric, &w, &v, &amb, eps, &opts)?;
    check_design(&r)?;
    emit(a.out.as_ref(), &to_json(&r)?)
}

pub fn threshold(a: &ThresholdArgs) -> Result<(), CliError> {
    let m = read_sym(required(&a.m, "--M")?)?;
    let amb = build_ambiguity(&AmbiguityInputs {
        ambiguity: a.ambiguity.as_ref(),
        s0: a.s0.as_ref(),
        gamma1: a.gamma1,
        gamma2: a.gamma2,
        alpha: a.alpha,
        support: a.support.as_ref(),
        box_half_widths: &a.box_half_widths,
    })?;
    let eps = *required(&a.epsilon, "--epsilon")?;
    let region = EllipsoidRegion::new(m)?;
    if let Some(path) = &a.dump_sdp {
        let text = if amb.support().is_unbounded() {
            "# unbounded support: the threshold is closed-form, no SDP is solved\n".to_string()
        } else {
            design::threshold_sdp(&region, &amb, eps, a.tau0)?.dump()
        };
        write_file(path, &text)?;
    }
    let r = design::safe_threshold(&region, &amb, eps, a.tau0)?;
    if !(r.j_th >= 0.0) || !r.j_th.is_finite() {
        return Err(CliError::Invariant(format!("threshold {} is not finite and nonnegative", r.j_th)));
    }
    check_probability("FAR bound", r.far_bound.value)?;
    if r.far_bound.value > eps + FAR_SLACK {
        return Err(CliError::Invariant(format!(
            "threshold {} certifies FAR {} above epsilon {eps}",
            r.j_th, r.far_bound.value
        )));
    }
    emit(a.out.as_ref(), &to_json(&r)?)
}

/// Effective benchmark run: generator config, fit recipe and alpha.
#[derive(Debug, Serialize)]
struct RunRecord {
    benchmark: BenchmarkConfig,
    fit: FitOptions,
    alpha: Alpha,
    n_r: usize,
    n: usize,
    m_f: usize,
    gamma1: f64,
    gamma2: f64,
}

struct Prepared {
    bench: Benchmark,
    amb: AmbiguitySet,
    record: RunRecord,
}

fn prepare(a: &SimulateArgs) -> Result<Prepared, CliError> {
    let d = BenchmarkConfig::default();
    let config = BenchmarkConfig {
        seed: a.seed.unwrap_or(d.seed),
        n_train: a.n_train.unwrap_or(d.n_train),
        n_test: a.n_test.unwrap_or(d.n_test),
        fault_onset: a.fault_onset.unwrap_or(d.fault_onset),
        fault_magnitude: a.fault_magnitude.unwrap_or(d.fault_magnitude),
        disturbance_family: a.disturbance_family.map_or(d.disturbance_family, Into::into),
        s: a.s.unwrap_or(d.s),
        residual_dim: a.residual_dim.or(d.residual_dim),
    };
    let f = FitOptions::default();
    let fit = FitOptions {
        confidence: a.confidence.unwrap_or(f.confidence),
        resamples: a.resamples.unwrap_or(f.resamples),
        seed: a.bootstrap_seed.unwrap_or(f.seed),
        box_inflation: if a.unbounded {
            None
        } else {
            Some(a.box_inflation.or(f.box_inflation).unwrap_or(1.2))
        },
    };
    let bench = sysmodel::three_tank_benchmark(&config)?;
    let n_r = bench.model.n_r();
    let alpha = a.alpha.unwrap_or(Alpha::Finite(n_r as f64));
    let amb = ambiguity::fit_ambiguity(&bench.train.residuals, alpha, &fit)?;
    let record = RunRecord {
        benchmark: config,
        fit,
        alpha,
        n_r,
        n: bench.model.n(),
        m_f: linalg::rank(&bench.model.v),
        gamma1: amb.gamma1(),
        gamma2: amb.gamma2(),
    };
    Ok(Prepared { bench, amb, record })
}

fn write_benchmark(dir: &Path, p: &Prepared) -> Result<(), CliError> {
    p.bench.train.write_csv(dir.join("train.csv"))?;
    p.bench.test.write_csv(dir.join("test.csv"))?;
    linalg::write_matrix_csv(dir.join("V.csv"), &p.bench.model.v)?;
    linalg::write_matrix_csv(dir.join("S0.csv"), p.amb.s0().matrix())?;
    write_file(&dir.join("ambiguity.json"), &(p.amb.to_json() + "\n"))?;
    write_file(&dir.join("model.json"), &to_json(&p.bench.model)?)?;
    write_file(&dir.join("system.json"), &to_json(&p.bench.system)?)?;
    write_file(&dir.join("run.json"), &to_json(&p.record)?)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let dir = out_dir(&a.out_dir)?;
    let p = prepare(a)?;
    write_benchmark(&dir, &p)?;
    say(&format!(
        "residual dimension {}, disturbance dimension {}, fault rank {}, gamma1 {}, gamma2 {}\nwrote {}\n",
        p.record.n_r,
        p.record.n,
        p.record.m_f,
        p.record.gamma1,
        p.record.gamma2,
        dir.display()
    ))
}

/// One evaluated column of a FAR/FDR table.
struct Column {
    label: String,
    far: f64,
    fdr: f64,
}

fn table_csv(cols: &[Column]) -> String {
    let mut csv = csv_row(std::iter::once("rate".to_string()).chain(cols.iter().map(|c| c.label.clone())));
    csv.push_str(&csv_row(std::iter::once("FAR".to_string()).chain(cols.iter().map(|c| c.far.to_string()))));
    csv.push_str(&csv_row(std::iter::once("FDR".to_string()).chain(cols.iter().map(|c| c.fdr.to_string()))));
    csv
}

fn evaluate(label: String, p: &DMatrix<f64>, data: &LabeledData, j_th: f64) -> Result<Column, CliError> {
    if p.ncols() != data.dim() {
        return Err(usage(format!(
            "{label}: P has {} columns but the residuals have dimension {}",
            p.ncols(),
            data.dim()
        )));
    }
    let r = verify::evaluate_far_fdr(p, data, j_th)?;
    Ok(Column {
        label,
        far: r.far.value,
        fdr: r.fdr.value,
    })
}

fn glrt_column(
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
    data: &LabeledData,
) -> Result<Column, CliError> {
    let pg = design::glrt_projector(w, v, amb)?;
    let th = verify::glrt_chi2_threshold(linalg::rank(v), eps)?;
    evaluate("GLRT-chi2".into(), &pg, data, th)
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let path = required(&a.dataset, "--dataset")?;
    if !path.exists() {
        return Err(CliError::io(path, "no such file"));
    }
    let data = LabeledData::read_csv(path)?;
    if data.is_empty() {
        return Err(usage(format!("{}: empty dataset", path.display())));
    }
    let j_th = a.threshold.unwrap_or(1.0);
    if !(j_th > 0.0) || !j_th.is_finite() {
        return Err(usage(format!("threshold must be positive, got {j_th}")));
    }
    let mut designs = Vec::with_capacity(a.designs.len());
    for p in &a.designs {
        let r: DesignResult =
            serde_json::from_str(&read_text(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        designs.push(r);
    }
    let mut cols = Vec::new();
    for r in &designs {
        let clash = designs.iter().filter(|o| o.scheme == r.scheme).count() > 1;
        let label = if clash {
            let m = if r.metric == Metric::Frobenius { "rho1" } else { "rho2" };
            format!("{}/{m}", r.scheme)
        } else {
            r.scheme.to_string()
        };
        cols.push(evaluate(label, &r.p, &data, j_th)?);
    }
    if a.glrt {
        let v = read_matrix(required(&a.v, "--V")?)?;
        let w = match &a.w {
            Some(p) => read_matrix(p)?,
            None => DMatrix::identity(v.nrows(), v.nrows()),
        };
        let amb = build_ambiguity(&AmbiguityInputs {
            ambiguity: Some(required(&a.ambiguity, "--ambiguity")?),
            s0: None,
            gamma1: None,
            gamma2: None,
            alpha: None,
            support: None,
            box_half_widths: &[],
        })?;
        let eps = *required(&a.epsilon, "--epsilon")?;
        cols.push(glrt_column(&w, &v, &amb, eps, &data)?);
    }
    if cols.is_empty() {
        return Err(usage("nothing to evaluate: pass --design and/or --glrt"));
    }
    emit(a.out.as_ref(), &table_csv(&cols))
}

/// Ordering of the four objectives at one epsilon: DR-B-alpha dominates
/// DR-U-alpha and DR-B, and DR-U-alpha dominates DR-U.
fn ordered(row: &[f64; 4]) -> bool {
    let [u, ua, b, ba] = *row;
    ba >= ua.max(b) - 1e-6 && ua >= u - 1e-6
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    run: RunRecord,
    epsilons: Vec<f64>,
    eval_epsilon: f64,
    ordering_rho1: bool,
    ordering_rho2: bool,
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let dir = out_dir(&a.out_dir)?;
    let p = prepare(&a.benchmark())?;
    write_benchmark(&dir, &p)?;
    let n_r = p.bench.model.n_r();
    let w = DMatrix::identity(n_r, n_r);
    let v = &p.bench.model.v;
    let eps = epsilons_or_default(&a.epsilons)?;
    let eval_eps = a.eval_epsilon.unwrap_or(0.05);
    epsilons_or_default(&[eval_eps])?;
    let opts = DesignOptions {
        grid_points: a.grid_points.unwrap_or(15),
        ..DesignOptions::default()
    };
    if opts.grid_points == 0 {
        return Err(usage("--grid-points must be positive"));
    }
    let designs_dir = dir.join("designs");
    fs::create_dir_all(&designs_dir).map_err(|e| CliError::io(&designs_dir, e))?;
    let mut ordering = [true; 2];
    let mut report = String::new();
    for (k, (metric, name)) in [(Metric::Frobenius, "rho1"), (Metric::PseudoDet, "rho2")].into_iter().enumerate() {
        let rows = objective_rows(&w, v, &p.amb, metric, &eps, &opts)?;
        ordering[k] = rows.iter().all(ordered);
        write_file(&dir.join(format!("objectives_{name}.csv")), &objective_csv(&eps, &rows))?;
        if a.svg {
            write_file(&dir.join(format!("objectives_{name}.svg")), &objective_svg(metric, &eps, &rows))?;
        }
        let mut cols = Vec::new();
        for scheme in Scheme::ALL {
            let r = design::design(scheme, metric, &w, v, &p.amb, eval_eps, &opts)?;
            check_design(&r)?;
            let file = format!("{name}_{}.json", scheme.label());
            write_file(&designs_dir.join(file), &to_json(&r)?)?;
            cols.push(evaluate(scheme.label().into(), &r.p, &p.bench.test, 1.0)?);
        }
        cols.push(glrt_column(&w, v, &p.amb, eval_eps, &p.bench.test)?);
        let table = table_csv(&cols);
        write_file(&dir.join(format!("far_fdr_{name}.csv")), &table)?;
        let _ = writeln!(report, "{name} at epsilon {eval_eps}:\n{table}");
    }
    let alphas = parse_alphas("1:1024")?;
    let c_args = BoundArgs {
        sweep: Some(BoundSweep::Alpha),
        out: Some(dir.join("c_alpha.csv")),
        svg: a.svg.then(|| dir.join("c_alpha.svg")),
        alphas: Some(format!("{}:{}:{}", alphas[0], alphas[alphas.len() - 1], alphas.len())),
        ..BoundArgs::default()
    };
    bound(&c_args)?;
    let summary = SweepSummary {
        run: p.record,
        epsilons: eps,
        eval_epsilon: eval_eps,
        ordering_rho1: ordering[0],
        ordering_rho2: ordering[1],
    };
    write_file(&dir.join("summary.json"), &to_json(&summary)?)?;
    let _ = writeln!(
        report,
        "objective ordering holds: rho1 {}, rho2 {}\nwrote {}",
        summary.ordering_rho1,
        summary.ordering_rho2,
        dir.display()
    );
    say(&report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_lists() {
        let g = parse_alphas("1:1024").unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[40], 1024.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(parse_alphas("2:8:3").unwrap().len(), 3);
        assert_eq!(parse_alphas("1,3,9").unwrap(), vec![1.0, 3.0, 9.0]);
        assert!(parse_alphas("0:4").is_err());
        assert!(parse_alphas("a,b").is_err());
        assert!(parse_alphas("4:1").is_err());
    }

    #[test]
    fn ordering_check() {
        assert!(ordered(&[1.0, 2.0, 1.5, 2.0]));
        assert!(!ordered(&[1.0, 2.0, 2.5, 2.0]));
        assert!(!ordered(&[3.0, 2.0, 1.5, 2.0]));
    }
}
