//! Small dense semidefinite programs.
//!
//! Problems are assembled from named variables (scalars, vectors, symmetric
//! matrices) and affine matrix expressions that must be positive semidefinite.
//! Internally every variable is flattened to scalar coordinates `x`, and each
//! LMI block is stored as `F0 + sum_i x_i F_i`. The solver is an
//! infeasible-start primal-dual path-following method with the HKM search
//! direction and Mehrotra predictor-corrector steps, applied to
//!
//! ```text
//! maximize  b^T y + sum_k w_k log det S_k
//! s.t.      S = C - sum_i y_i A_i  (block diagonal, PSD)
//! ```
//!
//! where `C = F0`, `A_i = -F_i`. Blocks carrying a log-det weight are driven
//! to `X_k S_k = w_k I` instead of complementarity, which is the optimality
//! condition of the max-det problem. Everything runs on `Vec`/`BTreeMap`
//! in a fixed order, so identical input gives bit-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SymMatrix;

/// Default relative tolerance on each of the three KKT residuals.
pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Scalar,
    Vector(usize),
    Sym(usize),
}

impl VarKind {
    pub fn len(self) -> usize {
        match self {
            VarKind::Scalar => 1,
            VarKind::Vector(k) => k,
            VarKind::Sym(k) => k * (k + 1) / 2,
        }
    }
}

/// Handle to a variable. Symmetric matrix variables are stored as their upper
/// triangle in row-major order, so coordinate `(i, j)` with `i <= j` is the
/// matrix entry `X[i][j] = X[j][i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    offset: usize,
    kind: VarKind,
}

impl Var {
    pub fn kind(&self) -> VarKind {
        self.kind
    }

    /// Scalar handle to entry `i` of a vector variable.
    pub fn entry(&self, i: usize) -> Var {
        match self.kind {
            VarKind::Vector(k) if i < k => Var {
                offset: self.offset + i,
                kind: VarKind::Scalar,
            },
            VarKind::Scalar if i == 0 => *self,
            _ => panic!("entry {i} out of range for {:?}", self.kind),
        }
    }

    fn sym_index(&self, i: usize, j: usize) -> usize {
        let VarKind::Sym(k) = self.kind else {
            panic!("not a symmetric matrix variable");
        };
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // Row-major upper triangle: rows before i contribute k + (k-1) + ...
        self.offset + i * k - i * (i.saturating_sub(1)) / 2 - i + j
    }
}

/// Affine scalar expression `constant + sum c_i x_i`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    terms: BTreeMap<usize, f64>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    fn add(&mut self, idx: usize, c: f64) {
        *self.terms.entry(idx).or_insert(0.0) += c;
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scalar(mut self, v: Var, c: f64) -> Self {
        assert_eq!(v.kind, VarKind::Scalar, "scalar term needs a scalar variable");
        self.add(v.offset, c);
        self
    }

    /// Adds `g^T q` for a vector variable `q`.
    pub fn dot(mut self, v: Var, g: &DVector<f64>) -> Self {
        let VarKind::Vector(k) = v.kind else {
            panic!("dot term needs a vector variable");
        };
        assert_eq!(k, g.len());
        for i in 0..k {
            self.add(v.offset + i, g[i]);
        }
        self
    }

    /// Adds `scale * Tr(G X)` for a symmetric matrix variable `X`.
    pub fn trace(mut self, v: Var, g: &DMatrix<f64>, scale: f64) -> Self {
        let VarKind::Sym(k) = v.kind else {
            panic!("trace term needs a symmetric matrix variable");
        };
        assert_eq!((k, k), g.shape());
        for i in 0..k {
            for j in i..k {
                let c = if i == j { g[(i, i)] } else { g[(i, j)] + g[(j, i)] };
                self.add(v.sym_index(i, j), scale * c);
            }
        }
        self
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&i, &c)| c * x[i]).sum::<f64>()
    }
}

/// Affine symmetric matrix expression `F0 + sum_i x_i F_i`.
#[derive(Debug, Clone)]
pub struct Lmi {
    name: String,
    dim: usize,
    constant: DMatrix<f64>,
    terms: BTreeMap<usize, DMatrix<f64>>,
}

impl Lmi {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Lmi {
            name: name.into(),
            dim,
            constant: DMatrix::zeros(dim, dim),
            terms: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn coeff(&mut self, idx: usize) -> &mut DMatrix<f64> {
        let d = self.dim;
        self.terms.entry(idx).or_insert_with(|| DMatrix::zeros(d, d))
    }

    /// Adds `m` at `(row, col)` and, off the diagonal, `m^T` at `(col, row)`.
    fn place(target: &mut DMatrix<f64>, row: usize, col: usize, m: &DMatrix<f64>) {
        let (r, c) = m.shape();
        {
            let mut v = target.view_mut((row, col), (r, c));
            v += m;
        }
        if row != col {
            let mut v = target.view_mut((col, row), (c, r));
            v += m.transpose();
        }
    }

    pub fn constant_at(mut self, row: usize, col: usize, m: &DMatrix<f64>) -> Self {
        Self::place(&mut self.constant, row, col, m);
        self
    }

    pub fn constant_entry(self, row: usize, col: usize, value: f64) -> Self {
        self.constant_at(row, col, &DMatrix::from_element(1, 1, value))
    }

    /// Adds `x * m` at `(row, col)` (mirrored off the diagonal) for a scalar `x`.
    pub fn scalar_at(mut self, v: Var, row: usize, col: usize, m: &DMatrix<f64>) -> Self {
        assert_eq!(v.kind, VarKind::Scalar, "scalar_at needs a scalar variable");
        Self::place(self.coeff(v.offset), row, col, m);
        self
    }

    pub fn scalar_entry(self, v: Var, row: usize, col: usize, c: f64) -> Self {
        self.scalar_at(v, row, col, &DMatrix::from_element(1, 1, c))
    }

    /// Places `scale * q` as a column starting at `(row, col)`, mirrored.
    pub fn vector_at(mut self, v: Var, row: usize, col: usize, scale: f64) -> Self {
        let VarKind::Vector(k) = v.kind else {
            panic!("vector_at needs a vector variable");
        };
        for i in 0..k {
            let mut e = DMatrix::zeros(k, 1);
            e[(i, 0)] = scale;
            Self::place(self.coeff(v.offset + i), row, col, &e);
        }
        self
    }

    /// Places `scale * X` on the diagonal block starting at `row`.
    pub fn sym_at(self, v: Var, row: usize, scale: f64) -> Self {
        let VarKind::Sym(k) = v.kind else {
            panic!("sym_at needs a symmetric matrix variable");
        };
        self.sym_congruence(v, &DMatrix::identity(k, k), row, scale)
    }

    /// Places `scale * L^T X L` on the diagonal block starting at `row`.
    pub fn sym_congruence(mut self, v: Var, l: &DMatrix<f64>, row: usize, scale: f64) -> Self {
        let VarKind::Sym(k) = v.kind else {
            panic!("sym_congruence needs a symmetric matrix variable");
        };
        assert_eq!(l.nrows(), k, "congruence factor has wrong row count");
        let d = l.ncols();
        for i in 0..k {
            for j in i..k {
                // E = e_i e_j^T + e_j e_i^T (or e_i e_i^T); L^T E L = l_i l_j^T + l_j l_i^T.
                let li = l.row(i).transpose();
                let lj = l.row(j).transpose();
                let mut m = &li * lj.transpose();
                if i != j {
                    m += &lj * li.transpose();
                }
                m *= scale;
                let target = self.coeff(v.sym_index(i, j));
                let mut view = target.view_mut((row, row), (d, d));
                view += &m;
            }
        }
        self
    }

    /// Value of the expression at `x`.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (&i, f) in &self.terms {
            if x[i] != 0.0 {
                m += f * x[i];
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
struct Block {
    lmi: Lmi,
    logdet: Option<f64>,
}

/// A semidefinite program assembled from LMI blocks.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    vars: Vec<(String, Var)>,
    n: usize,
    sense: Sense,
    objective: LinExpr,
    blocks: Vec<Block>,
}

impl Default for SdpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        SdpProblem {
            vars: Vec::new(),
            n: 0,
            sense: Sense::Minimize,
            objective: LinExpr::new(),
            blocks: Vec::new(),
        }
    }

    fn add_var(&mut self, name: &str, kind: VarKind) -> Var {
        let v = Var { offset: self.n, kind };
        self.n += kind.len();
        self.vars.push((name.to_owned(), v));
        v
    }

    pub fn scalar(&mut self, name: &str) -> Var {
        self.add_var(name, VarKind::Scalar)
    }

    pub fn vector(&mut self, name: &str, k: usize) -> Var {
        self.add_var(name, VarKind::Vector(k))
    }

    pub fn sym(&mut self, name: &str, k: usize) -> Var {
        self.add_var(name, VarKind::Sym(k))
    }

    pub fn num_scalars(&self) -> usize {
        self.n
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.sense = Sense::Minimize;
        self.objective = objective;
    }

    pub fn maximize(&mut self, objective: LinExpr) {
        self.sense = Sense::Maximize;
        self.objective = objective;
    }

    /// Requires `lmi ⪰ 0`.
    pub fn add_lmi(&mut self, lmi: Lmi) {
        self.blocks.push(Block { lmi, logdet: None });
    }

    /// Requires `lmi ≻ 0` and adds `weight * log det(lmi)` to a maximized
    /// objective.
    pub fn add_logdet(&mut self, lmi: Lmi, weight: f64) {
        self.blocks.push(Block {
            lmi,
            logdet: Some(weight),
        });
    }

    /// Requires `expr >= 0`.
    pub fn add_ge(&mut self, name: &str, expr: LinExpr) {
        let mut lmi = Lmi::new(name, 1);
        lmi.constant[(0, 0)] = expr.constant;
        for (&i, &c) in &expr.terms {
            lmi.coeff(i)[(0, 0)] += c;
        }
        self.add_lmi(lmi);
    }

    pub fn add_nonneg(&mut self, v: Var) {
        let name = self
            .vars
            .iter()
            .find(|(_, w)| w.offset <= v.offset && v.offset < w.offset + w.kind.len())
            .map_or_else(|| "nonneg".to_owned(), |(n, _)| format!("{n} >= 0"));
        self.add_ge(&name, LinExpr::new().scalar(v, 1.0));
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn has_logdet(&self) -> bool {
        self.blocks.iter().any(|b| b.logdet.is_some())
    }

    /// Objective value at `x`, including log-det terms.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut v = self.objective.evaluate(x);
        for b in &self.blocks {
            if let Some(w) = b.logdet {
                v += w * crate::linalg::log_det_pd(&b.lmi.evaluate(x));
            }
        }
        v
    }

    /// Smallest eigenvalue of every block at `x`, each divided by
    /// `1 + max |F0|` of that block.
    pub fn block_min_eigs(&self, x: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| {
                let m = b.lmi.evaluate(x);
                let scale = 1.0 + b.lmi.constant.amax();
                SymMatrix::symmetrized(m).min_eigenvalue() / scale
            })
            .collect()
    }

    pub fn block_names(&self) -> Vec<&str> {
        self.blocks.iter().map(|b| b.lmi.name.as_str()).collect()
    }

    /// Human-readable listing of variables, objective and every block.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        let _ = writeln!(out, "# sdp: {} scalars, {} blocks, {sense}", self.n, self.blocks.len());
        for (name, v) in &self.vars {
            let _ = writeln!(out, "var {name} {:?} at {}", v.kind, v.offset);
        }
        let _ = write!(out, "objective: {:e}", self.objective.constant);
        for (&i, &c) in &self.objective.terms {
            if c != 0.0 {
                let _ = write!(out, " {c:+e}*x[{i}]");
            }
        }
        out.push('\n');
        for (k, b) in self.blocks.iter().enumerate() {
            let tag = b.logdet.map_or(String::new(), |w| format!(" logdet weight {w}"));
            let _ = writeln!(out, "block {k} \"{}\" dim {}{tag}", b.lmi.name, b.lmi.dim);
            write_matrix(&mut out, "F0", &b.lmi.constant);
            for (&i, f) in &b.lmi.terms {
                write_matrix(&mut out, &format!("F[{i}]"), f);
            }
        }
        out
    }
}

fn write_matrix(out: &mut String, label: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "  {label}:");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>12.5e}", m[(i, j)])).collect();
        let _ = writeln!(out, "    [{}]", row.join(" "));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

/// Relative KKT residuals. `primal` measures violation of the problem's own
/// LMIs, `dual` the dual equality constraints, `gap` the duality gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kkt {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Kkt {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Flattened variable values.
    pub x: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub kkt: Kkt,
    pub iterations: usize,
    /// Set when a log-det argument had to be regularized.
    #[serde(default)]
    pub regularized: bool,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    pub fn scalar(&self, v: Var) -> f64 {
        assert_eq!(v.kind, VarKind::Scalar);
        self.x[v.offset]
    }

    pub fn vector(&self, v: Var) -> DVector<f64> {
        let VarKind::Vector(k) = v.kind else {
            panic!("not a vector variable");
        };
        DVector::from_column_slice(&self.x[v.offset..v.offset + k])
    }

    pub fn sym(&self, v: Var) -> SymMatrix {
        let VarKind::Sym(k) = v.kind else {
            panic!("not a symmetric matrix variable");
        };
        SymMatrix::symmetrized(DMatrix::from_fn(k, k, |i, j| self.x[v.sym_index(i, j)]))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: 120,
        }
    }
}

pub fn solve_sdp(problem: &SdpProblem, tol: f64) -> Result<SdpSolution, ConicError> {
    solve_sdp_with(problem, &SolverOptions { tol, ..SolverOptions::default() })
}

struct StdBlock {
    c: DMatrix<f64>,
    /// `(i, A_i)` for every coordinate appearing in this block.
    a: Vec<(usize, DMatrix<f64>)>,
    logdet: Option<f64>,
}

struct Standard {
    m: usize,
    b: DVector<f64>,
    blocks: Vec<StdBlock>,
    norm_b: f64,
    norm_c: f64,
}

impl Standard {
    fn from_problem(p: &SdpProblem) -> Result<Self, ConicError> {
        let m = p.n;
        if m == 0 {
            return Err(ConicError::InvalidProblem("problem has no variables".into()));
        }
        if p.blocks.is_empty() {
            return Err(ConicError::InvalidProblem("problem has no constraints".into()));
        }
        let mut b = DVector::zeros(m);
        for (&i, &c) in &p.objective.terms {
            if i >= m {
                return Err(ConicError::InvalidProblem(format!("objective refers to x[{i}]")));
            }
            b[i] = c;
        }
        if p.sense == Sense::Minimize {
            if p.has_logdet() {
                return Err(ConicError::InvalidProblem(
                    "log-det terms require a maximization".into(),
                ));
            }
            b = -b;
        }
        let mut used = vec![false; m];
        let mut blocks = Vec::with_capacity(p.blocks.len());
        for blk in &p.blocks {
            let d = blk.lmi.dim;
            if d == 0 || blk.lmi.constant.shape() != (d, d) {
                return Err(ConicError::InvalidProblem(format!("block `{}` has bad shape", blk.lmi.name)));
            }
            if let Some(w) = blk.logdet {
                if !(w > 0.0) || !w.is_finite() {
                    return Err(ConicError::InvalidProblem(format!("log-det weight must be positive, got {w}")));
                }
            }
            let mut a = Vec::new();
            for (&i, f) in &blk.lmi.terms {
                if i >= m {
                    return Err(ConicError::InvalidProblem(format!("block `{}` refers to x[{i}]", blk.lmi.name)));
                }
                if f.amax() > 0.0 {
                    used[i] = true;
                    a.push((i, sym(&(-f))));
                }
            }
            if blk.lmi.constant.iter().chain(a.iter().flat_map(|(_, f)| f.iter())).any(|v| !v.is_finite()) {
                return Err(ConicError::InvalidProblem(format!("block `{}` has non-finite data", blk.lmi.name)));
            }
            blocks.push(StdBlock {
                c: sym(&blk.lmi.constant),
                a,
                logdet: blk.logdet,
            });
        }
        if let Some(i) = used.iter().position(|u| !u) {
            let name = p
                .vars
                .iter()
                .find(|(_, v)| v.offset <= i && i < v.offset + v.kind.len())
                .map_or("?", |(n, _)| n.as_str());
            return Err(ConicError::InvalidProblem(format!(
                "coordinate x[{i}] of `{name}` appears in no constraint"
            )));
        }
        let norm_b = b.norm();
        let norm_c = blocks.iter().map(|k| k.c.norm_squared()).sum::<f64>().sqrt();
        Ok(Standard {
            m,
            b,
            blocks,
            norm_b,
            norm_c,
        })
    }

    fn a_adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|k| {
                let d = k.c.nrows();
                let mut s = DMatrix::zeros(d, d);
                for (i, a) in &k.a {
                    if y[*i] != 0.0 {
                        s += a * y[*i];
                    }
                }
                s
            })
            .collect()
    }

    fn a_op(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (k, xk) in self.blocks.iter().zip(x) {
            for (i, a) in &k.a {
                out[*i] += a.dot(xk);
            }
        }
        out
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn norm_blocks(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// Largest step `t` with `x + t dx ⪰ 0`, for `x ≻ 0`.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = ch.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let t = sym(&(&linv * dx * linv.transpose()));
    let lmin = nalgebra::SymmetricEigen::new(t)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn spd_inv(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| sym(&c.inverse()))
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
}

struct Measures {
    rel_p: f64,
    rel_d: f64,
    rel_gap: f64,
    pobj: f64,
}

fn measure(sf: &Standard, it: &Iterate) -> Measures {
    let ax = sf.a_op(&it.x);
    let rel_p = (&sf.b - ax).norm() / (1.0 + sf.norm_b);
    let aty = sf.a_adjoint(&it.y);
    let rd: f64 = sf
        .blocks
        .iter()
        .zip(&aty)
        .zip(&it.s)
        .map(|((k, a), s)| (&k.c - s - a).norm_squared())
        .sum::<f64>()
        .sqrt();
    let rel_d = rd / (1.0 + sf.norm_c);
    let mut gap = 0.0;
    let mut pobj = 0.0;
    let mut dobj = sf.b.dot(&it.y);
    for ((k, x), s) in sf.blocks.iter().zip(&it.x).zip(&it.s) {
        pobj += k.c.dot(x);
        let xs = x.dot(s);
        match k.logdet {
            None => gap += xs,
            Some(w) => {
                let n = x.nrows() as f64;
                let ldx = crate::linalg::log_det_pd(x);
                let lds = crate::linalg::log_det_pd(s);
                pobj += w * n * w.ln() - w * ldx - w * n;
                dobj += w * lds;
                gap += xs - w * n - w * (ldx + lds - n * w.ln());
            }
        }
    }
    let rel_gap = gap.max(0.0) / (1.0 + pobj.abs() + dobj.abs());
    Measures {
        rel_p,
        rel_d,
        rel_gap,
        pobj,
    }
}

/// Solves the Newton system for one set of per-block targets and corrector
/// terms. Returns `(dx, dy, ds)`.
#[allow(clippy::too_many_arguments)]
fn newton_direction(
    sf: &Standard,
    it: &Iterate,
    sinv: &[DMatrix<f64>],
    rd: &[DMatrix<f64>],
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    targets: &[f64],
    corr: Option<&[DMatrix<f64>]>,
) -> (Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>) {
    // H_k = tau_k S^{-1} - X Rd S^{-1} - (dXa dSa S^{-1}).
    let h: Vec<DMatrix<f64>> = (0..sf.blocks.len())
        .map(|k| {
            let mut h = &sinv[k] * targets[k] - &it.x[k] * &rd[k] * &sinv[k];
            if let Some(c) = corr {
                h -= &c[k];
            }
            h
        })
        .collect();
    let mut rhs = sf.b.clone();
    for (k, blk) in sf.blocks.iter().enumerate() {
        for (i, a) in &blk.a {
            rhs[*i] -= a.dot(&h[k]);
        }
    }
    let dy = chol.solve(&rhs);
    let aty = sf.a_adjoint(&dy);
    let ds: Vec<DMatrix<f64>> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
    let dx: Vec<DMatrix<f64>> = (0..sf.blocks.len())
        .map(|k| {
            let mut t = &sinv[k] * targets[k] - &it.x[k] * &ds[k] * &sinv[k];
            if let Some(c) = corr {
                t -= &c[k];
            }
            sym(&t) - &it.x[k]
        })
        .collect();
    (dx, dy, ds)
}

fn schur(sf: &Standard, it: &Iterate, sinv: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(sf.m, sf.m);
    for (k, blk) in sf.blocks.iter().enumerate() {
        for (p, (i, ai)) in blk.a.iter().enumerate() {
            let g = &it.x[k] * ai * &sinv[k];
            for (j, aj) in &blk.a[p..] {
                let v = aj.dot(&g);
                m[(*i, *j)] += v;
                if i != j {
                    m[(*j, *i)] += v;
                }
            }
        }
    }
    m
}

fn factor(m: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..8 {
        let mut r = m.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += reg;
        }
        if let Some(c) = r.cholesky() {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

pub fn solve_sdp_with(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, ConicError> {
    let sf = Standard::from_problem(problem)?;
    if !(opts.tol > 0.0) {
        return Err(ConicError::InvalidProblem(format!("tolerance must be positive, got {}", opts.tol)));
    }
    // Aim a decade below the contract so the final iterate clears it with margin.
    let target = 0.1 * opts.tol;
    let nb = sf.blocks.len();

    let mut it = Iterate {
        x: Vec::with_capacity(nb),
        y: DVector::zeros(sf.m),
        s: Vec::with_capacity(nb),
    };
    for blk in &sf.blocks {
        let d = blk.c.nrows();
        let nd = d as f64;
        let mut xi: f64 = 10.0_f64.max(nd.sqrt());
        let mut eta: f64 = 10.0_f64.max(nd.sqrt()).max(blk.c.norm());
        for (i, a) in &blk.a {
            let na = a.norm();
            xi = xi.max(nd * (1.0 + sf.b[*i].abs()) / (1.0 + na));
            eta = eta.max(na);
        }
        let s = DMatrix::identity(d, d) * eta;
        let x = match blk.logdet {
            Some(w) => DMatrix::identity(d, d) * (w / eta),
            None => DMatrix::identity(d, d) * xi,
        };
        it.x.push(x);
        it.s.push(s);
    }
    let n_ordinary: f64 = sf
        .blocks
        .iter()
        .filter(|b| b.logdet.is_none())
        .map(|b| b.c.nrows() as f64)
        .sum();

    let mut best: Option<(f64, DVector<f64>, Measures)> = None;
    let mut since_best = 0;
    let mut stalls = 0;
    let mut iterations = 0;
    let mut status = SdpStatus::NumericalTrouble;
    let x_scale0 = norm_blocks(&it.x);

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let meas = measure(&sf, &it);
        let worst = meas.rel_p.max(meas.rel_d).max(meas.rel_gap);
        if worst.is_finite() && best.as_ref().is_none_or(|(w, _, _)| worst < *w) {
            best = Some((worst, it.y.clone(), meas));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if worst <= target {
            status = SdpStatus::Optimal;
            break;
        }
        if iter == opts.max_iter || since_best > 20 {
            break;
        }

        // Certificates of infeasibility or unboundedness of the LMI problem.
        let xn = norm_blocks(&it.x);
        if xn > 1e8 * (1.0 + x_scale0) {
            let cx: f64 = sf.blocks.iter().zip(&it.x).map(|(k, x)| k.c.dot(x)).sum();
            let ax = sf.a_op(&it.x).norm();
            if cx < 0.0 && ax <= 1e-6 * (-cx) * (1.0 + sf.norm_b) / (1.0 + sf.norm_c) {
                status = SdpStatus::Infeasible;
                break;
            }
        }
        let by = sf.b.dot(&it.y);
        if by > 1e10 * (1.0 + sf.norm_c) {
            let aty = sf.a_adjoint(&it.y);
            let worst_eig = aty
                .iter()
                .map(|a| {
                    nalgebra::SymmetricEigen::new(sym(&(-a)))
                        .eigenvalues
                        .iter()
                        .copied()
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::INFINITY, f64::min);
            if worst_eig / by >= -1e-8 {
                status = SdpStatus::Unbounded;
                break;
            }
        }

        let Some(sinv) = it.s.iter().map(spd_inv).collect::<Option<Vec<_>>>() else {
            break;
        };
        let aty = sf.a_adjoint(&it.y);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &sf.blocks[k].c - &it.s[k] - &aty[k]).collect();
        let m = schur(&sf, &it, &sinv);
        let Some(chol) = factor(&m) else {
            break;
        };
        let mu = if n_ordinary > 0.0 {
            sf.blocks
                .iter()
                .zip(&it.x)
                .zip(&it.s)
                .filter(|((b, _), _)| b.logdet.is_none())
                .map(|((_, x), s)| x.dot(s))
                .sum::<f64>()
                / n_ordinary
        } else {
            0.0
        };

        // Predictor: affine-scaling targets on ordinary blocks.
        let t_aff: Vec<f64> = sf.blocks.iter().map(|b| b.logdet.unwrap_or(0.0)).collect();
        let (dxa, _dya, dsa) = newton_direction(&sf, &it, &sinv, &rd, &chol, &t_aff, None);
        let ap = (0..nb).map(|k| max_step(&it.x[k], &dxa[k])).fold(1.0_f64, f64::min);
        let ad = (0..nb).map(|k| max_step(&it.s[k], &dsa[k])).fold(1.0_f64, f64::min);
        let sigma = if n_ordinary > 0.0 && mu > 0.0 {
            let mu_aff: f64 = (0..nb)
                .filter(|&k| sf.blocks[k].logdet.is_none())
                .map(|k| (&it.x[k] + &dxa[k] * ap).dot(&(&it.s[k] + &dsa[k] * ad)))
                .sum::<f64>()
                / n_ordinary;
            (mu_aff.max(0.0) / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };

        // Corrector with centering and second-order term.
        let t_cor: Vec<f64> = sf.blocks.iter().map(|b| b.logdet.unwrap_or(sigma * mu)).collect();
        let corr: Vec<DMatrix<f64>> = (0..nb).map(|k| &dxa[k] * &dsa[k] * &sinv[k]).collect();
        let (dx, dy, ds) = newton_direction(&sf, &it, &sinv, &rd, &chol, &t_cor, Some(&corr));
        let gamma = 0.98;
        let ap = (0..nb).map(|k| max_step(&it.x[k], &dx[k])).fold(f64::INFINITY, f64::min);
        let ad = (0..nb).map(|k| max_step(&it.s[k], &ds[k])).fold(f64::INFINITY, f64::min);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) {
            break;
        }
        for k in 0..nb {
            it.x[k] = sym(&(&it.x[k] + &dx[k] * ap));
            it.s[k] = sym(&(&it.s[k] + &ds[k] * ad));
        }
        it.y += &dy * ad;
        if ap < 1e-9 && ad < 1e-9 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    let (y, meas) = match status {
        SdpStatus::Optimal | SdpStatus::Infeasible | SdpStatus::Unbounded => (it.y.clone(), measure(&sf, &it)),
        SdpStatus::NumericalTrouble => match best {
            Some((worst, y, meas)) => {
                // A stalled run whose best iterate already meets the contract is accepted.
                if worst <= opts.tol {
                    status = SdpStatus::Optimal;
                }
                (y, meas)
            }
            None => (it.y.clone(), measure(&sf, &it)),
        },
    };
    let x: Vec<f64> = y.iter().copied().collect();
    let objective = problem.objective_value(&x);
    let dual_objective = match problem.sense {
        Sense::Maximize => meas.pobj,
        Sense::Minimize => -meas.pobj,
    } + problem.objective.constant;
    Ok(SdpSolution {
        status,
        x,
        objective,
        dual_objective,
        kkt: Kkt {
            primal: meas.rel_d,
            dual: meas.rel_p,
            gap: meas.rel_gap,
        },
        iterations,
        regularized: false,
    })
}

/// Max-det by sequential linearization: each outer step replaces every
/// `w log det F(x)` term by its tangent `w Tr(F(x_k)^{-1} F(x))`, solves the
/// resulting linear SDP and moves from `x_k` toward its solution with an
/// exact line search on the true objective. The objective is therefore
/// nondecreasing across iterations. Stops when the improvement falls to
/// `tol`.
///
/// `start` must make every log-det argument positive definite; without one
/// the native interior-point solution is used as the starting point.
pub fn maxdet_iterate(
    problem: &SdpProblem,
    start: Option<&[f64]>,
    tol: f64,
    max_outer: usize,
) -> Result<SdpSolution, ConicError> {
    if problem.sense != Sense::Maximize || !problem.has_logdet() {
        return Err(ConicError::InvalidProblem(
            "maxdet_iterate needs a maximization with a log-det term".into(),
        ));
    }
    let native;
    let mut x: Vec<f64> = match start {
        Some(s) => {
            if s.len() != problem.n {
                return Err(ConicError::InvalidProblem(format!(
                    "start has {} coordinates, problem has {}",
                    s.len(),
                    problem.n
                )));
            }
            s.to_vec()
        }
        None => {
            native = solve_sdp(problem, DEFAULT_TOL)?;
            native.x.clone()
        }
    };
    let mut regularized = false;
    let mut phi = problem.objective_value(&x);
    if !phi.is_finite() {
        // Nudge every log-det argument into the interior.
        regularized = true;
        let mut p = problem.clone();
        for b in &mut p.blocks {
            if b.logdet.is_some() {
                for i in 0..b.lmi.dim {
                    b.lmi.constant[(i, i)] += 1e-9;
                }
            }
        }
        phi = p.objective_value(&x);
        if !phi.is_finite() {
            return Err(ConicError::InvalidProblem("start point is not in the log-det domain".into()));
        }
    }
    let mut last = None;
    let mut iterations = 0;
    for outer in 0..max_outer {
        iterations = outer + 1;
        let mut lin = problem.clone();
        let mut obj = problem.objective.clone();
        for b in &mut lin.blocks {
            if let Some(w) = b.logdet.take() {
                let f = b.lmi.evaluate(&x);
                let g = match spd_inv(&f) {
                    Some(g) => g,
                    None => {
                        regularized = true;
                        let mut f = f;
                        for i in 0..f.nrows() {
                            f[(i, i)] += 1e-9;
                        }
                        spd_inv(&f).ok_or_else(|| ConicError::InvalidProblem("singular log-det iterate".into()))?
                    }
                };
                obj.constant += w * g.dot(&b.lmi.constant);
                for (&i, fi) in &b.lmi.terms {
                    obj.add(i, w * g.dot(fi));
                }
            }
        }
        lin.objective = obj;
        let sub = solve_sdp(&lin, DEFAULT_TOL)?;
        if sub.status != SdpStatus::Optimal {
            last = Some(sub);
            break;
        }
        let dir: Vec<f64> = sub.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        // The objective along the segment is concave: golden-section search.
        let eval = |t: f64| {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let v = problem.objective_value(&xt);
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let r = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - r * (hi - lo);
        let mut d = lo + r * (hi - lo);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..80 {
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - r * (hi - lo);
                fc = eval(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + r * (hi - lo);
                fd = eval(d);
            }
        }
        let mut t = 0.5 * (lo + hi);
        let mut ft = eval(t);
        let f1 = eval(1.0);
        if f1 > ft {
            t = 1.0;
            ft = f1;
        }
        let improvement = ft - phi;
        if improvement > 0.0 {
            for (xi, di) in x.iter_mut().zip(&dir) {
                *xi += t * di;
            }
            phi = ft;
        }
        last = Some(sub);
        if improvement <= tol {
            break;
        }
    }
    let sub = last.ok_or_else(|| ConicError::InvalidProblem("no outer iterations".into()))?;
    let status = if sub.status == SdpStatus::Optimal {
        SdpStatus::Optimal
    } else {
        sub.status
    };
    Ok(SdpSolution {
        status,
        objective: phi,
        dual_objective: sub.dual_objective,
        kkt: sub.kkt,
        iterations,
        regularized,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sym_index_layout() {
        let mut p = SdpProblem::new();
        let _a = p.scalar("a");
        let x = p.sym("X", 3);
        let idx: Vec<usize> = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
            .iter()
            .map(|&(i, j)| x.sym_index(i, j))
            .collect();
        assert_eq!(idx, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(x.sym_index(2, 1), 5);
    }

    #[test]
    fn one_by_one_nonneg() {
        let mut p = SdpProblem::new();
        let t = p.scalar("t");
        p.minimize(LinExpr::new().scalar(t, 1.0));
        p.add_nonneg(t);
        let s = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!(s.scalar(t).abs() < 1e-7);
    }

    #[test]
    fn trace_above_identity() {
        let mut p = SdpProblem::new();
        let x = p.sym("X", 2);
        p.minimize(LinExpr::new().trace(x, &DMatrix::identity(2, 2), 1.0));
        p.add_lmi(Lmi::new("X - I", 2).sym_at(x, 0, 1.0).constant_at(0, 0, &(-DMatrix::identity(2, 2))));
        let s = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert_relative_eq!(s.objective, 2.0, epsilon = 1e-6);
        assert!(s.kkt.max() <= 1e-8);
    }

    #[test]
    fn two_by_two_determinant() {
        let mut p = SdpProblem::new();
        let x = p.scalar("x");
        p.maximize(LinExpr::new().scalar(x, 1.0));
        p.add_lmi(
            Lmi::new("[[1,x],[x,1]]", 2)
                .constant_at(0, 0, &DMatrix::identity(2, 2))
                .scalar_entry(x, 0, 1, 1.0),
        );
        let s = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert_relative_eq!(s.scalar(x), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x >= 1 and x <= -1.
        let mut p = SdpProblem::new();
        let x = p.scalar("x");
        p.minimize(LinExpr::new().scalar(x, 1.0));
        p.add_ge("x >= 1", LinExpr::new().scalar(x, 1.0).constant(-1.0));
        p.add_ge("x <= -1", LinExpr::new().scalar(x, -1.0).constant(-1.0));
        let s = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);

        let mut p = SdpProblem::new();
        let x = p.scalar("x");
        p.maximize(LinExpr::new().scalar(x, 1.0));
        p.add_ge("x >= 0", LinExpr::new().scalar(x, 1.0));
        let s = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(s.status, SdpStatus::Unbounded);
    }

    #[test]
    fn unused_variable_is_rejected() {
        let mut p = SdpProblem::new();
        let x = p.scalar("x");
        let _y = p.scalar("y");
        p.minimize(LinExpr::new().scalar(x, 1.0));
        p.add_nonneg(x);
        assert!(matches!(solve_sdp(&p, 1e-8), Err(ConicError::InvalidProblem(_))));
    }

    fn diag_maxdet() -> (SdpProblem, Var) {
        let mut p = SdpProblem::new();
        let x = p.sym("X", 2);
        p.maximize(LinExpr::new());
        p.add_lmi(
            Lmi::new("D - X", 2)
                .constant_at(0, 0, &DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])))
                .sym_at(x, 0, -1.0),
        );
        p.add_logdet(Lmi::new("X", 2).sym_at(x, 0, 1.0), 1.0);
        (p, x)
    }

    #[test]
    fn native_maxdet() {
        let (p, x) = diag_maxdet();
        let s = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert_relative_eq!(s.objective, 6.0_f64.ln(), epsilon = 1e-6);
        let xv = s.sym(x);
        assert_relative_eq!(xv.matrix()[(0, 0)], 2.0, epsilon = 1e-6);
        assert_relative_eq!(xv.matrix()[(1, 1)], 3.0, epsilon = 1e-6);
    }

    #[test]
    fn iterated_maxdet_is_monotone_and_converges() {
        let (p, _) = diag_maxdet();
        let start = [0.5, 0.0, 0.5];
        let mut prev = p.objective_value(&start);
        for outer in 1..6 {
            let s = maxdet_iterate(&p, Some(&start), 0.0, outer).unwrap();
            assert!(s.objective >= prev - 1e-12);
            prev = s.objective;
        }
        let s = maxdet_iterate(&p, Some(&start), 1e-10, 200).unwrap();
        assert_relative_eq!(s.objective, 6.0_f64.ln(), epsilon = 1e-4);

        let mut q = SdpProblem::new();
        let x = q.scalar("x");
        q.maximize(LinExpr::new());
        q.add_ge("x <= 5", LinExpr::new().scalar(x, -1.0).constant(5.0));
        q.add_logdet(Lmi::new("x", 1).scalar_entry(x, 0, 0, 1.0), 1.0);
        let s = maxdet_iterate(&q, Some(&[1.0]), 1e-12, 50).unwrap();
        assert_relative_eq!(s.objective, 5.0_f64.ln(), epsilon = 1e-7);
    }

    #[test]
    fn bit_deterministic() {
        let (p, _) = diag_maxdet();
        let a = solve_sdp(&p, 1e-8).unwrap();
        let b = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn dump_lists_blocks() {
        let (p, _) = diag_maxdet();
        let d = p.dump();
        assert!(d.contains("block 1 \"X\" dim 2 logdet weight 1"));
        assert!(d.contains("var X Sym(2)"));
    }
}
