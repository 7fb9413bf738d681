//! Residual-generator synthesis with a worst-case false-alarm guarantee.
//!
//! Given the design form `r = P (W xi + V f)` and an ambiguity set for `xi`,
//! find `P` maximizing a detectability metric subject to
//! `sup P{||P W xi||^2 > 1} <= epsilon`:
//!
//! * unbounded support: closed forms ([`frobenius_design`] for `rho1`,
//!   [`glrt_design`] for `rho2`), with or without unimodality;
//! * bounded support: an SDP in `Pbar = P^T P` ([`bounded_design`]) solved on
//!   a grid of linearization points `tau0`, with or without unimodality.
//!
//! [`safe_threshold`] calibrates the alarm threshold of a fixed quadratic
//! statistic instead, and [`worst_case_far`] certifies any given `P`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::{Alpha, AmbiguitySet};
use crate::bounds::{self, BoundResult, BoundsError, EllipsoidRegion, SupportVars, Whitened};
use crate::conic::{self, ConicError, Kkt, LinExpr, Lmi, SdpProblem, SdpSolution, SdpStatus};
use crate::linalg::{self, LinalgError, SymMatrix};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("fault direction is invisible in the residual (V^T p1 = 0)")]
    DegenerateFaultDirection,
    #[error("residual covariance W S0 W^T is singular")]
    SingularResidualCovariance,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("scheme {0} needs {1}")]
    SchemeMismatch(Scheme, &'static str),
    #[error("design failed at every tau0 grid point ({} points)", .0.len())]
    DesignFailed(Vec<GridPoint>),
    #[error("could not certify the designed P below epsilon (best bound {0})")]
    CertificationFailed(f64),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "DR-U")]
    DrU,
    #[serde(rename = "DR-U-alpha")]
    DrUAlpha,
    #[serde(rename = "DR-B")]
    DrB,
    #[serde(rename = "DR-B-alpha")]
    DrBAlpha,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::DrU, Scheme::DrUAlpha, Scheme::DrB, Scheme::DrBAlpha];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::DrU => "DR-U",
            Scheme::DrUAlpha => "DR-U-alpha",
            Scheme::DrB => "DR-B",
            Scheme::DrBAlpha => "DR-B-alpha",
        }
    }

    pub fn bounded(self) -> bool {
        matches!(self, Scheme::DrB | Scheme::DrBAlpha)
    }

    pub fn unimodal(self) -> bool {
        matches!(self, Scheme::DrUAlpha | Scheme::DrBAlpha)
    }

    /// The ambiguity set this scheme designs against: drops the support for
    /// the `U` schemes and the unimodality for the non-`alpha` ones.
    pub fn ambiguity(self, amb: &AmbiguitySet) -> Result<AmbiguitySet, DesignError> {
        let base = if self.bounded() {
            if amb.support().is_unbounded() {
                return Err(DesignError::SchemeMismatch(self, "a bounded support"));
            }
            amb.clone()
        } else {
            amb.without_support()
        };
        if self.unimodal() {
            if amb.alpha().is_infinite() {
                return Err(DesignError::SchemeMismatch(self, "a finite alpha"));
            }
            Ok(base)
        } else {
            Ok(base.with_alpha(Alpha::Infinite).expect("infinite alpha is valid"))
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// `rho1(P) = ||P V||_F^2`.
    #[serde(rename = "rho1")]
    Frobenius,
    /// `rho2(P) = log pdet(V^T P^T P V)`.
    #[serde(rename = "rho2")]
    PseudoDet,
}

/// Detectability of `P` under the chosen metric.
pub fn metric_value(metric: Metric, p: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64, DesignError> {
    let pv = p * v;
    match metric {
        Metric::Frobenius => Ok(pv.norm_squared()),
        Metric::PseudoDet => {
            let g = SymMatrix::symmetrized(pv.transpose() * &pv);
            match linalg::log_pseudo_det(&g) {
                Ok(v) => Ok(v),
                Err(LinalgError::ZeroMatrix) => Ok(f64::NEG_INFINITY),
                Err(e) => Err(e.into()),
            }
        }
    }
}

/// Outcome of one `tau0` grid point of [`bounded_design`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    pub tau0: Option<f64>,
    pub status: Option<SdpStatus>,
    pub objective: Option<f64>,
    pub kkt: Option<Kkt>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridPoint>,
    /// Optimal value of the design SDP at the chosen grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdp_objective: Option<f64>,
    /// Objective after the linearization polish of a log-det design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxdet_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_kkt: Option<Kkt>,
    /// Factor applied to `P` when the optimum sits where the support
    /// touches the acceptance boundary and the bound is not certifiable there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backoff: Option<f64>,
    /// The closed-form design beat the SDP solution and was kept.
    #[serde(default)]
    pub closed_form_selected: bool,
    /// The design for the same set without unimodality won; its
    /// certificate (`tau0 = None`) bounds the unimodal set too.
    #[serde(default)]
    pub moment_only_selected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignResult {
    #[serde(rename = "P", with = "linalg::serde_rows")]
    pub p: DMatrix<f64>,
    /// Metric value of `P`.
    pub objective: f64,
    pub certified_far: BoundResult,
    pub scheme: Scheme,
    pub metric: Metric,
    pub epsilon: f64,
    pub tau0: Option<f64>,
    pub diagnostics: Diagnostics,
}

fn check_epsilon(eps: f64, alpha: Alpha) -> Result<(), DesignError> {
    let ok = match alpha {
        Alpha::Infinite => eps > 0.0 && eps <= 1.0,
        Alpha::Finite(_) => eps > 0.0 && eps < 1.0,
    };
    if ok {
        Ok(())
    } else {
        Err(DesignError::InvalidEpsilon(eps))
    }
}

fn check_form(w: &DMatrix<f64>, v: &DMatrix<f64>, amb: &AmbiguitySet) -> Result<(), DesignError> {
    if w.ncols() != amb.dim() {
        return Err(DesignError::DimensionMismatch(format!(
            "W has {} columns but the disturbance has dimension {}",
            w.ncols(),
            amb.dim()
        )));
    }
    if v.nrows() != w.nrows() {
        return Err(DesignError::DimensionMismatch(format!(
            "W has {} rows but V has {}",
            w.nrows(),
            v.nrows()
        )));
    }
    if v.ncols() == 0 || v.amax() == 0.0 {
        return Err(DesignError::DegenerateFaultDirection);
    }
    Ok(())
}

/// `W S0 W^T`, required positive definite.
fn residual_covariance(w: &DMatrix<f64>, amb: &AmbiguitySet) -> Result<SymMatrix, DesignError> {
    let s = SymMatrix::symmetrized(w * amb.s0().matrix() * w.transpose());
    let e = linalg::sym_eig(&s);
    let n = e.values.len();
    if n == 0 || e.values[0] <= 0.0 || e.values[n - 1] <= linalg::RANK_TOL * e.values[0] {
        return Err(DesignError::SingularResidualCovariance);
    }
    Ok(s)
}

/// Largest `gamma2 Tr(M S0)` allowed by the closed-form bound at tolerance
/// `eps`: `eps / c_alpha` in the small-deviation branch and
/// `alpha / (alpha + 2) * (1 - eps)^{-2/alpha}` beyond it.
pub fn trace_budget(alpha: Alpha, eps: f64) -> Result<f64, DesignError> {
    check_epsilon(eps, alpha)?;
    match alpha {
        Alpha::Infinite => Ok(eps),
        Alpha::Finite(a) => {
            let c = bounds::improvement_factor(alpha)?;
            if eps <= a / (a + 2.0) {
                Ok(eps / c)
            } else {
                Ok(a / (a + 2.0) * (-(2.0 / a) * (-eps).ln_1p()).exp())
            }
        }
    }
}

fn closed_form_result(
    p: DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
    metric: Metric,
) -> Result<DesignResult, DesignError> {
    let objective = metric_value(metric, &p, v)?;
    let certified_far = bounds::gauss_bound(&region_of(&p, w)?, amb)?;
    Ok(DesignResult {
        p,
        objective,
        certified_far,
        scheme: if amb.alpha().is_infinite() { Scheme::DrU } else { Scheme::DrUAlpha },
        metric,
        epsilon: eps,
        tau0: None,
        diagnostics: Diagnostics::default(),
    })
}

/// `W^T P^T P W` as an acceptance region.
pub fn region_of(p: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<EllipsoidRegion, DesignError> {
    let pw = p * w;
    Ok(EllipsoidRegion::new(SymMatrix::symmetrized(pw.transpose() * pw))?)
}

/// Rank-one design maximizing `rho1` under unbounded support:
/// `P = sqrt(omega1 * budget / gamma2) p1^T / ||V^T p1||` where
/// `(omega1, p1)` is the top pair of `V V^T p = omega (W S0 W^T) p`.
/// The support of `amb` is ignored.
pub fn frobenius_design(
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
) -> Result<DesignResult, DesignError> {
    check_form(w, v, amb)?;
    let budget = trace_budget(amb.alpha(), eps)?;
    let sbar = residual_covariance(w, amb)?;
    let vvt = SymMatrix::symmetrized(v * v.transpose());
    let (omega, p1) = linalg::gen_eig_largest(&vvt, &sbar)?;
    let vtp = v.transpose() * &p1;
    let norm = vtp.norm();
    if !(omega > 0.0) || norm <= 1e-12 * v.norm() * p1.norm() {
        return Err(DesignError::DegenerateFaultDirection);
    }
    let scale = (omega * budget / amb.gamma2()).sqrt();
    let p = DMatrix::from_row_slice(1, p1.len(), p1.as_slice()) * (scale / norm);
    closed_form_result(p, w, v, amb, eps, Metric::Frobenius)
}

/// `S^{-1/2} V (V^T S^{-1} V)^+ V^T S^{-1}` with `S = W S0 W^T`.
pub fn glrt_projector(w: &DMatrix<f64>, v: &DMatrix<f64>, amb: &AmbiguitySet) -> Result<DMatrix<f64>, DesignError> {
    check_form(w, v, amb)?;
    let sbar = residual_covariance(w, amb)?;
    let (_, inv_root) = linalg::psd_sqrt_inv(&sbar)?;
    let sinv = linalg::spd_inverse(&sbar)?;
    let g = SymMatrix::symmetrized(v.transpose() * sinv.matrix() * v);
    let gp = linalg::psd_pinv(&g)?;
    Ok(inv_root.matrix() * v * gp.matrix() * v.transpose() * sinv.matrix())
}

/// Scaled GLRT design maximizing `rho2` under unbounded support:
/// `P = sqrt(budget / (m_f gamma2)) P_GLRT` with `m_f = rank(V)`.
pub fn glrt_design(
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
) -> Result<DesignResult, DesignError> {
    check_form(w, v, amb)?;
    let budget = trace_budget(amb.alpha(), eps)?;
    let m_f = linalg::compact_svd(v)?.rank();
    let pg = glrt_projector(w, v, amb)?;
    let p = pg * (budget / (m_f as f64 * amb.gamma2())).sqrt();
    closed_form_result(p, w, v, amb, eps, Metric::PseudoDet)
}

/// Closed-form design for the unbounded-support schemes.
pub fn closed_form_design(
    metric: Metric,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
) -> Result<DesignResult, DesignError> {
    match metric {
        Metric::Frobenius => frobenius_design(w, v, amb, eps),
        Metric::PseudoDet => glrt_design(w, v, amb, eps),
    }
}

#[derive(Debug, Clone)]
pub struct DesignOptions {
    /// Number of `tau0` grid points (odd counts put the default at the center).
    pub grid_points: usize,
    /// The grid spans `[d / span, d * span]` around the default `d`.
    pub grid_span: f64,
    /// Explicit grid overriding the two fields above.
    pub tau0_grid: Option<Vec<f64>>,
    /// Run the linearization polish on a log-det design.
    pub polish: bool,
    pub tol: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            grid_points: 15,
            grid_span: 4.0,
            tau0_grid: None,
            polish: true,
            tol: conic::DEFAULT_TOL,
        }
    }
}

/// `count` log-spaced points over `[d / span, d * span]`; for odd `count`
/// the middle point is exactly `d`.
pub fn tau0_grid(d: f64, count: usize, span: f64) -> Vec<f64> {
    if count <= 1 {
        return vec![d];
    }
    let half = (count - 1) as f64 / 2.0;
    (0..count)
        .map(|i| {
            let k = i as f64 - half;
            if k == 0.0 {
                d
            } else {
                d * span.powf(k / half)
            }
        })
        .collect()
}

/// Problem data shared by the design and threshold programs, in whitened
/// coordinates `xi = S0^{1/2} z`.
struct DesignGeometry {
    wh: Whitened,
    /// `H = S^{-1/2} W S0^{1/2}` (orthonormal rows) for the design; `M_z` for
    /// a threshold.
    h: DMatrix<f64>,
    /// `T = (W S0 W^T)^{-1/2}`, mapping the scaled variable back:
    /// `Pbar = T Phat T`.
    t: DMatrix<f64>,
}

impl DesignGeometry {
    fn new(w: &DMatrix<f64>, amb: &AmbiguitySet) -> Result<Self, DesignError> {
        let wh = Whitened::new(amb)?;
        let sbar = residual_covariance(w, amb)?;
        let (_, t) = linalg::psd_sqrt_inv(&sbar)?;
        let t = t.into_matrix();
        let h = &t * w * &wh.root;
        Ok(DesignGeometry { wh, h, t })
    }
}

/// How the quadratic term enters the tail LMI: through a matrix variable
/// `H^T Phat H` (design) or a scalar multiple `s M_z` (threshold).
enum Quadratic<'a> {
    Design(&'a DMatrix<f64>),
    Threshold(&'a DMatrix<f64>),
}

struct Program {
    problem: SdpProblem,
    phat: Option<conic::Var>,
    s: Option<conic::Var>,
}

/// Scaled tail program: `gamma2 infl Tr(Q) + q0 <= eps eta` and, for finite
/// alpha,
/// `[[Q - K, q, 0], [q^T, q0 - eta, 0], [0, 0, 1]] + sum beta Phi + eta tau^{-a} corner ⪰ 0`,
/// or for infinite alpha `[[Q - K, q], [q^T, q0 - eta + 1]] + sum beta Phi ⪰ 0`,
/// plus the support LMI.
fn tail_program(wh: &Whitened, quad: Quadratic<'_>, amb: &AmbiguitySet, eps: f64, tau0: Option<f64>) -> Program {
    let n = wh.n();
    let mut p = SdpProblem::new();
    let vars = SupportVars::declare(&mut p, wh);
    let eta = p.scalar("eta");
    p.add_nonneg(eta);
    let inflation = amb.alpha().moment_inflation();
    let budget = LinExpr::new()
        .scalar(eta, eps)
        .trace(vars.q_mat, &DMatrix::identity(n, n), -amb.gamma2() * inflation)
        .scalar(vars.q0, -1.0);
    p.add_ge("moment budget", budget);
    let dim = if amb.alpha().is_infinite() { n + 1 } else { n + 2 };
    let mut lmi = vars.main_lmi("tail", wh, dim).scalar_entry(eta, n, n, -1.0);
    let (mut phat, mut s) = (None, None);
    match quad {
        Quadratic::Design(h) => {
            let v = p.sym("Phat", h.nrows());
            p.add_lmi(Lmi::new("Phat >= 0", h.nrows()).sym_at(v, 0, 1.0));
            lmi = lmi.sym_congruence(v, h, 0, -1.0);
            phat = Some(v);
        }
        Quadratic::Threshold(mz) => {
            let v = p.scalar("s");
            lmi = lmi.scalar_at(v, 0, 0, &(-mz));
            s = Some(v);
        }
    }
    match (amb.alpha(), tau0) {
        (Alpha::Finite(a), Some(tau0)) => {
            let pa = (-a * tau0.ln()).exp();
            lmi = lmi
                .constant_entry(n + 1, n + 1, 1.0)
                .scalar_entry(eta, n, n, (a + 1.0) * pa)
                .scalar_entry(eta, n, n + 1, -a / (2.0 * tau0) * pa);
        }
        _ => {
            lmi = lmi.constant_entry(n, n, 1.0);
        }
    }
    p.add_lmi(lmi);
    Program { problem: p, phat, s }
}

/// Builds the design SDP at one `tau0` (ignored for infinite alpha).
pub fn design_sdp(
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
    metric: Metric,
    tau0: Option<f64>,
) -> Result<SdpProblem, DesignError> {
    let geo = DesignGeometry::new(w, amb)?;
    Ok(build_design(&geo, v, amb, eps, metric, tau0)?.0)
}

fn build_design(
    geo: &DesignGeometry,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
    metric: Metric,
    tau0: Option<f64>,
) -> Result<(SdpProblem, conic::Var), DesignError> {
    let mut prog = tail_program(&geo.wh, Quadratic::Design(&geo.h), amb, eps, tau0);
    let phat = prog.phat.expect("design program has Phat");
    let tv = &geo.t * v;
    match metric {
        Metric::Frobenius => {
            let g = &tv * tv.transpose();
            prog.problem.maximize(LinExpr::new().trace(phat, &g, 1.0));
        }
        Metric::PseudoDet => {
            let svd = linalg::compact_svd(v)?;
            let l = &geo.t * &svd.u1;
            prog.problem.maximize(LinExpr::new());
            prog.problem
                .add_logdet(Lmi::new("U1^T Pbar U1", svd.rank()).sym_congruence(phat, &l, 0, 1.0), 1.0);
        }
    }
    Ok((prog.problem, phat))
}

/// `P` with `P^T P = Pbar`: Cholesky factor when positive definite,
/// symmetric square root otherwise.
pub fn factor_pbar(pbar: &SymMatrix) -> Result<DMatrix<f64>, DesignError> {
    let e = linalg::sym_eig(pbar);
    let lmax = e.values.iter().fold(0.0_f64, |m, v| m.max(*v));
    let lmin = e.values.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if lmin > 1e-9 * lmax {
        if let Some(ch) = pbar.matrix().clone().cholesky() {
            return Ok(ch.l().transpose());
        }
    }
    let clipped = DMatrix::from_diagonal(&DVector::from_iterator(
        e.values.len(),
        e.values.iter().map(|&l| l.max(0.0).sqrt()),
    ));
    let root = &e.vectors * clipped * e.vectors.transpose();
    Ok((&root + root.transpose()) * 0.5)
}

struct Candidate {
    tau0: Option<f64>,
    solution: SdpSolution,
    phat: conic::Var,
}

/// SDP design under a bounded support. With finite alpha the program is
/// solved on a `tau0` grid around the default linearization point of the
/// matching closed-form design and the best point is kept (ties go to the
/// lowest index); with infinite alpha a single support S-procedure program
/// is solved.
pub fn bounded_design(
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
    metric: Metric,
    opts: &DesignOptions,
) -> Result<DesignResult, DesignError> {
    check_form(w, v, amb)?;
    check_epsilon(eps, amb.alpha())?;
    let scheme = if amb.alpha().is_infinite() { Scheme::DrB } else { Scheme::DrBAlpha };
    if amb.support().is_unbounded() {
        return Err(DesignError::SchemeMismatch(scheme, "a bounded support"));
    }
    let geo = DesignGeometry::new(w, amb)?;
    // The matching closed-form design is feasible for the program at its
    // default linearization point and competes with the SDP optimum.
    let seed = closed_form_design(metric, w, v, &amb.without_support(), eps)?;
    let seed_tau0 = seed_tau0(&seed.p, w, amb)?;
    let grid: Vec<Option<f64>> = match seed_tau0 {
        None => vec![None],
        Some(d) => {
            let pts = match &opts.tau0_grid {
                Some(g) => g.clone(),
                None => tau0_grid(d, opts.grid_points, opts.grid_span),
            };
            if let Some(bad) = pts.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
                return Err(BoundsError::InvalidTau0(*bad).into());
            }
            pts.into_iter().map(Some).collect()
        }
    };
    let outcomes: Vec<(GridPoint, Option<Candidate>)> = grid
        .par_iter()
        .map(|&tau0| {
            let run = || -> Result<Candidate, DesignError> {
                let (prob, phat) = build_design(&geo, v, amb, eps, metric, tau0)?;
                let solution = conic::solve_sdp(&prob, opts.tol)?;
                Ok(Candidate { tau0, solution, phat })
            };
            match run() {
                Ok(c) => {
                    let gp = GridPoint {
                        tau0,
                        status: Some(c.solution.status),
                        objective: Some(c.solution.objective),
                        kkt: Some(c.solution.kkt),
                        error: None,
                    };
                    let keep = c.solution.status == SdpStatus::Optimal && c.solution.objective.is_finite();
                    (gp, keep.then_some(c))
                }
                Err(e) => (
                    GridPoint {
                        tau0,
                        status: None,
                        objective: None,
                        kkt: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let mut best: Option<&Candidate> = None;
    for (_, c) in &outcomes {
        if let Some(c) = c {
            let better = best.is_none_or(|b| c.solution.objective > b.solution.objective + 1e-9 * (1.0 + b.solution.objective.abs()));
            if better {
                best = Some(c);
            }
        }
    }
    let grid_report: Vec<GridPoint> = outcomes.iter().map(|(g, _)| g.clone()).collect();

    let mut chosen: Option<DesignResult> = None;
    if let Some(best) = best {
        let mut x = best.solution.x.clone();
        let mut maxdet_objective = None;
        if metric == Metric::PseudoDet && opts.polish {
            let (prob, _) = build_design(&geo, v, amb, eps, metric, best.tau0)?;
            let polished = conic::maxdet_iterate(&prob, Some(&x), 1e-10, 3)?;
            if polished.objective >= best.solution.objective {
                x = polished.x.clone();
            }
            maxdet_objective = Some(polished.objective);
        }
        let phat = sol_sym(&x, &best.solution, best.phat);
        let pbar = SymMatrix::symmetrized(&geo.t * phat.matrix() * &geo.t);
        let p = factor_pbar(&pbar)?;
        if let Ok((p, certified_far, backoff)) = certify(p, w, amb, eps, best.tau0) {
            chosen = Some(DesignResult {
                objective: metric_value(metric, &p, v)?,
                p,
                certified_far,
                scheme,
                metric,
                epsilon: eps,
                tau0: best.tau0,
                diagnostics: Diagnostics {
                    grid: Vec::new(),
                    sdp_objective: Some(best.solution.objective),
                    maxdet_objective,
                    solver_kkt: Some(best.solution.kkt),
                    backoff,
                    closed_form_selected: false,
                    moment_only_selected: false,
                },
            });
        }
    }
    if chosen.as_ref().is_none_or(|c| seed.objective > c.objective) {
        if let Ok((p, certified_far, backoff)) = certify(seed.p.clone(), w, amb, eps, seed_tau0) {
            let objective = metric_value(metric, &p, v)?;
            if chosen.as_ref().is_none_or(|c| objective > c.objective) {
                let sdp = chosen.as_ref().map(|c| c.diagnostics.clone()).unwrap_or_default();
                chosen = Some(DesignResult {
                    p,
                    objective,
                    certified_far,
                    scheme,
                    metric,
                    epsilon: eps,
                    tau0: seed_tau0,
                    diagnostics: Diagnostics {
                        backoff,
                        closed_form_selected: true,
                        ..sdp
                    },
                });
            }
        }
    }
    // The tau0 linearization cannot certify a zero tail, so near the
    // set-membership regime the program without unimodality can do better.
    // Its certificate covers the unimodal subset as well.
    if !amb.alpha().is_infinite() {
        let relaxed = amb.with_alpha(Alpha::Infinite).expect("infinite alpha is valid");
        if let Ok(r) = bounded_design(w, v, &relaxed, eps, metric, opts) {
            if chosen.as_ref().is_none_or(|c| r.objective > c.objective) {
                chosen = Some(DesignResult {
                    scheme,
                    diagnostics: Diagnostics {
                        moment_only_selected: true,
                        ..r.diagnostics
                    },
                    ..r
                });
            }
        }
    }
    match chosen {
        Some(mut r) => {
            r.diagnostics.grid = grid_report;
            Ok(r)
        }
        None => Err(DesignError::DesignFailed(grid_report)),
    }
}

/// Re-solves the bound for the extracted `P`. When the support touches the
/// boundary of the acceptance region the scaled program can reach its
/// optimum only in the limit `eta -> 0`, where the bound is not
/// certifiable; `P` is then shrunk by the smallest factor `1 - 10^-k` that
/// certifies.
fn certify(
    p: DMatrix<f64>,
    w: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
    tau0: Option<f64>,
) -> Result<(DMatrix<f64>, BoundResult, Option<f64>), DesignError> {
    let ok = |r: &Result<BoundResult, BoundsError>| matches!(r, Ok(b) if b.value <= eps + 1e-7);
    let first = bounds::bounded_gauss_bound(&region_of(&p, w)?, amb, tau0);
    if ok(&first) {
        return Ok((p, first?, None));
    }
    let mut best = first.as_ref().map_or(f64::INFINITY, |b| b.value);
    for k in (2..=7).rev() {
        let factor = 1.0 - 10f64.powi(-k);
        let shrunk = &p * factor;
        let r = bounds::bounded_gauss_bound(&region_of(&shrunk, w)?, amb, tau0);
        if ok(&r) {
            return Ok((shrunk, r?, Some(factor)));
        }
        if let Ok(b) = &r {
            best = best.min(b.value);
        }
    }
    Err(DesignError::CertificationFailed(best))
}

fn sol_sym(x: &[f64], template: &SdpSolution, v: conic::Var) -> SymMatrix {
    let mut s = template.clone();
    s.x = x.to_vec();
    s.sym(v)
}

fn seed_tau0(p: &DMatrix<f64>, w: &DMatrix<f64>, amb: &AmbiguitySet) -> Result<Option<f64>, DesignError> {
    match amb.alpha() {
        Alpha::Infinite => Ok(None),
        Alpha::Finite(_) => Ok(Some(bounds::default_tau0(&region_of(p, w)?, amb)?)),
    }
}

/// Center of the `tau0` grid of [`bounded_design`]: the default
/// linearization point of the matching closed-form design. `None` for
/// infinite alpha.
pub fn default_design_tau0(
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
    metric: Metric,
) -> Result<Option<f64>, DesignError> {
    let seed = closed_form_design(metric, w, v, &amb.without_support(), eps)?;
    seed_tau0(&seed.p, w, amb)
}

/// Design for any of the four schemes. The ambiguity set is restricted as
/// the scheme requires (see [`Scheme::ambiguity`]).
pub fn design(
    scheme: Scheme,
    metric: Metric,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    amb: &AmbiguitySet,
    eps: f64,
    opts: &DesignOptions,
) -> Result<DesignResult, DesignError> {
    let set = scheme.ambiguity(amb)?;
    if scheme.bounded() {
        bounded_design(w, v, &set, eps, metric, opts)
    } else {
        closed_form_design(metric, w, v, &set, eps)
    }
}

/// Worst-case false-alarm rate of `||P W xi||^2 > 1` over `amb`: the
/// closed-form bound without support, the SDP bound with support (at
/// `tau0`, or the default linearization point).
pub fn worst_case_far(
    p: &DMatrix<f64>,
    w: &DMatrix<f64>,
    amb: &AmbiguitySet,
    tau0: Option<f64>,
) -> Result<BoundResult, DesignError> {
    if p.ncols() != w.nrows() {
        return Err(DesignError::DimensionMismatch(format!(
            "P has {} columns but W has {} rows",
            p.ncols(),
            w.nrows()
        )));
    }
    let region = region_of(p, w)?;
    if region.m().matrix().amax() == 0.0 {
        return Ok(bounds::gauss_bound(&region, amb)?);
    }
    if amb.support().is_unbounded() {
        return Ok(bounds::gauss_bound(&region, amb)?);
    }
    let own = bounds::bounded_gauss_bound(&region, amb, tau0)?;
    if amb.alpha().is_infinite() {
        return Ok(own);
    }
    // Dropping unimodality enlarges the set, so its bound is valid as well.
    let relaxed = amb.with_alpha(Alpha::Infinite).expect("infinite alpha is valid");
    let other = bounds::bounded_gauss_bound(&region, &relaxed, None)?;
    Ok(if other.value < own.value { other } else { own })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub j_th: f64,
    pub epsilon: f64,
    pub tau0: Option<f64>,
    /// Bound on `P{xi^T M xi > j_th}` at the returned threshold.
    pub far_bound: BoundResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<SdpSolution>,
}

/// Closed-form safe threshold under unbounded support: the smallest `J`
/// with `bound(M / J) <= eps`.
pub fn safe_threshold_unbounded(region: &EllipsoidRegion, amb: &AmbiguitySet, eps: f64) -> Result<f64, DesignError> {
    if region.dim() != amb.dim() {
        return Err(DesignError::DimensionMismatch(format!(
            "region is {} but the ambiguity set is {}",
            region.dim(),
            amb.dim()
        )));
    }
    let budget = trace_budget(amb.alpha(), eps)?;
    Ok(bounds::scaled_trace(region, amb) / budget)
}

/// Alarm threshold `J_th` with worst-case `P{xi^T M xi > J_th} <= eps`.
///
/// Without support this is the closed form. With a support, the program
/// maximizes `s` such that the statistic `s xi^T M xi` passes the scaled
/// tail program at tolerance `eps` and returns `J_th = 1 / s`; scaling `M`
/// scales `J_th` by the same factor. `tau0` is the linearization point for
/// the region `M / J_th`, defaulting to the one of the closed-form threshold.
/// For finite alpha the smaller of this and the threshold for the set
/// without unimodality is returned (then with `tau0 = None`).
pub fn safe_threshold(
    region: &EllipsoidRegion,
    amb: &AmbiguitySet,
    eps: f64,
    tau0: Option<f64>,
) -> Result<ThresholdResult, DesignError> {
    let j_unb = safe_threshold_unbounded(region, amb, eps)?;
    if amb.support().is_unbounded() || j_unb == 0.0 {
        let far_bound = if j_unb > 0.0 {
            bounds::gauss_bound(&region.scaled(1.0 / j_unb), amb)?
        } else {
            bounds::gauss_bound(&region.scaled(0.0), amb)?
        };
        return Ok(ThresholdResult {
            j_th: j_unb,
            epsilon: eps,
            tau0: None,
            far_bound,
            certificate: None,
        });
    }
    let tau0 = match amb.alpha() {
        Alpha::Infinite => None,
        Alpha::Finite(_) => Some(match tau0 {
            Some(t) if t > 0.0 && t.is_finite() => t,
            Some(t) => return Err(BoundsError::InvalidTau0(t).into()),
            None => bounds::default_tau0(&region.scaled(1.0 / j_unb), amb)?,
        }),
    };
    let prog = threshold_sdp_scaled(region, amb, eps, tau0, j_unb)?;
    let s_var = prog.s.expect("threshold program has s");
    let mut problem = prog.problem;
    problem.maximize(LinExpr::new().scalar(s_var, 1.0));
    let sol = conic::solve_sdp(&problem, conic::DEFAULT_TOL)?;
    if sol.status != SdpStatus::Optimal {
        return Err(BoundsError::SolverError {
            status: sol.status,
            kkt: sol.kkt,
        }
        .into());
    }
    // The program was posed for M / j_unb, so s* J_unb^{-1} is the scale.
    let s = sol.scalar(s_var);
    if !(s > 0.0) {
        return Err(BoundsError::SolverError {
            status: SdpStatus::NumericalTrouble,
            kkt: sol.kkt,
        }
        .into());
    }
    let j_th = j_unb / s;
    let far_bound = bounds::bounded_gauss_bound(&region.scaled(1.0 / j_th), amb, tau0)?;
    let own = ThresholdResult {
        j_th,
        epsilon: eps,
        tau0,
        far_bound,
        certificate: Some(sol),
    };
    if amb.alpha().is_infinite() {
        return Ok(own);
    }
    // A threshold safe for the set without unimodality is safe here too.
    let relaxed = amb.with_alpha(Alpha::Infinite).expect("infinite alpha is valid");
    match safe_threshold(region, &relaxed, eps, None) {
        Ok(r) if r.j_th < own.j_th => Ok(r),
        _ => Ok(own),
    }
}

fn threshold_sdp_scaled(
    region: &EllipsoidRegion,
    amb: &AmbiguitySet,
    eps: f64,
    tau0: Option<f64>,
    scale: f64,
) -> Result<Program, DesignError> {
    let wh = Whitened::new(amb)?;
    let mz = wh.region(region.m()) / scale;
    Ok(tail_program(&wh, Quadratic::Threshold(&mz), amb, eps, tau0))
}

/// The threshold program (variable `s`, maximized) for `--dump-sdp`.
pub fn threshold_sdp(region: &EllipsoidRegion, amb: &AmbiguitySet, eps: f64, tau0: Option<f64>) -> Result<SdpProblem, DesignError> {
    let j_unb = safe_threshold_unbounded(region, amb, eps)?;
    let scale = if j_unb > 0.0 { j_unb } else { 1.0 };
    let prog = threshold_sdp_scaled(region, amb, eps, tau0, scale)?;
    let s = prog.s.expect("threshold program has s");
    let mut p = prog.problem;
    p.maximize(LinExpr::new().scalar(s, 1.0));
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::SupportSet;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn scalar_amb(alpha: Alpha) -> AmbiguitySet {
        AmbiguitySet::moments(SymMatrix::identity(1), 1.0, alpha).unwrap()
    }

    #[test]
    fn scalar_frobenius_examples() {
        let one = dmatrix![1.0];
        let r = frobenius_design(&one, &one, &scalar_amb(Alpha::Finite(1.0)), 0.1).unwrap();
        assert_relative_eq!(r.p[(0, 0)].abs(), 0.225_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r.objective, 0.225, epsilon = 1e-12);
        assert_relative_eq!(r.certified_far.value, 0.1, epsilon = 1e-12);
        assert_eq!(r.scheme, Scheme::DrUAlpha);

        let r = frobenius_design(&one, &one, &scalar_amb(Alpha::Infinite), 0.1).unwrap();
        assert_relative_eq!(r.p[(0, 0)].abs(), 0.1_f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.scheme, Scheme::DrU);
    }

    #[test]
    fn branches_meet_at_the_boundary() {
        for a in [0.5, 1.0, 3.0, 9.0] {
            let edge = a / (a + 2.0);
            let inside = trace_budget(Alpha::Finite(a), edge).unwrap();
            let c = bounds::improvement_factor(Alpha::Finite(a)).unwrap();
            let beyond = a / (a + 2.0) * (1.0 - edge).powf(-2.0 / a);
            assert_relative_eq!(inside, edge / c, epsilon = 1e-12);
            assert_relative_eq!(inside / beyond, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_epsilon_branch_is_feasible() {
        let one = dmatrix![1.0];
        for a in [1.0, 2.0, 9.0] {
            let eps = 0.5 * (1.0 + a / (a + 2.0));
            let amb = scalar_amb(Alpha::Finite(a));
            for metric in [Metric::Frobenius, Metric::PseudoDet] {
                let r = closed_form_design(metric, &one, &one, &amb, eps).unwrap();
                assert_eq!(r.certified_far.branch, bounds::Branch::LargeDeviation);
                assert_relative_eq!(r.certified_far.value, eps, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn glrt_examples() {
        let one = dmatrix![1.0];
        let r = glrt_design(&one, &one, &scalar_amb(Alpha::Infinite), 0.1).unwrap();
        assert_relative_eq!(r.p[(0, 0)], 0.1_f64.sqrt(), epsilon = 1e-12);

        let v = dmatrix![2.0, 1.0; 0.0, 3.0];
        let amb = AmbiguitySet::moments(SymMatrix::identity(2), 1.0, Alpha::Infinite).unwrap();
        let pg = glrt_projector(&DMatrix::identity(2, 2), &v, &amb).unwrap();
        assert_relative_eq!(pg, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn glrt_regression_scale() {
        // alpha = 9, eps = 0.05, m_f = 2, gamma2 = 1.2: scale sqrt(0.05 / (2 * 1.2 * c9)).
        let amb = AmbiguitySet::moments(SymMatrix::identity(3), 1.2, Alpha::Finite(9.0)).unwrap();
        let w = DMatrix::identity(3, 3);
        let v = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
        let r = glrt_design(&w, &v, &amb, 0.05).unwrap();
        let c9 = (2.0_f64 / 11.0).powf(2.0 / 9.0);
        let scale = (0.05 / (2.0 * 1.2 * c9)).sqrt();
        let pg = glrt_projector(&w, &v, &amb).unwrap();
        assert_relative_eq!(r.p, pg * scale, epsilon = 1e-12);
        assert_relative_eq!(scale, 0.174_438_322_810_512, epsilon = 1e-12);
    }

    #[test]
    fn worst_case_far_examples() {
        let amb = AmbiguitySet::moments(SymMatrix::from_diagonal(&[1.0, 2.0]), 1.1, Alpha::Finite(3.0)).unwrap();
        let w = DMatrix::identity(2, 2);
        assert_eq!(worst_case_far(&DMatrix::zeros(1, 2), &w, &amb, None).unwrap().value, 0.0);
        let v = dmatrix![1.0; 0.5];
        let r = frobenius_design(&w, &v, &amb, 0.05).unwrap();
        let far = worst_case_far(&r.p, &w, &amb, None).unwrap();
        assert_relative_eq!(far.value, 0.05, epsilon = 1e-12);
        let doubled = worst_case_far(&(&r.p * 2.0), &w, &amb, None).unwrap();
        assert_relative_eq!(doubled.value, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn tau0_grid_centers_the_default() {
        let g = tau0_grid(2.5, 15, 4.0);
        assert_eq!(g.len(), 15);
        assert_eq!(g[7], 2.5);
        assert_relative_eq!(g[0], 2.5 / 4.0, epsilon = 1e-12);
        assert_relative_eq!(g[14], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn bounded_design_with_huge_support_matches_closed_form() {
        let amb = AmbiguitySet::moments(SymMatrix::from_diagonal(&[1.0, 0.5]), 1.2, Alpha::Finite(2.0))
            .unwrap()
            .with_support(SupportSet::centered_box(&[1e3, 1e3]).unwrap())
            .unwrap();
        let w = DMatrix::identity(2, 2);
        let v = dmatrix![1.0; 0.3];
        let eps = 0.05;
        let closed = frobenius_design(&w, &v, &amb.without_support(), eps).unwrap();
        let sdp = bounded_design(&w, &v, &amb, eps, Metric::Frobenius, &DesignOptions::default()).unwrap();
        assert!(sdp.objective >= closed.objective - 1e-4, "{} < {}", sdp.objective, closed.objective);
        assert!(sdp.certified_far.value <= eps + 1e-7);
    }

    #[test]
    fn threshold_closed_form_and_homogeneity() {
        let amb = AmbiguitySet::moments(SymMatrix::identity(2), 1.0, Alpha::Finite(1.0)).unwrap();
        let region = EllipsoidRegion::new(SymMatrix::identity(2)).unwrap();
        // GLRT-like index with Tr(M S0) = m_f = 2.
        let j = safe_threshold(&region, &amb, 0.01, None).unwrap();
        assert_relative_eq!(j.j_th, 2.0 * 4.0 / 9.0 / 0.01, epsilon = 1e-9);
        assert_relative_eq!(j.far_bound.value, 0.01, epsilon = 1e-12);

        let boxed = amb.with_support(SupportSet::centered_box(&[3.0, 3.0]).unwrap()).unwrap();
        let a = safe_threshold(&region, &boxed, 0.05, None).unwrap();
        let b = safe_threshold(&region.scaled(3.0), &boxed, 0.05, None).unwrap();
        assert_relative_eq!(b.j_th / a.j_th, 3.0, epsilon = 1e-6);
        assert!(a.j_th <= safe_threshold_unbounded(&region, &boxed, 0.05).unwrap() * (1.0 + 1e-7));
        assert!(a.far_bound.value <= 0.05 + 1e-7);
    }
}
