//! Discrete-time LTI plants, parity-space residuals and a synthetic
//! three-tank benchmark.
//!
//! The plant is
//! `x(k+1) = A x + B u + B_d d + B_f f`, `y = C x + D u + D_d d + D_f f`.
//! Stacking `s + 1` consecutive outputs gives
//! `y_s = Gamma_s x(k-s) + H_u u_s + H_d d_s + H_f f_s`; projecting onto the
//! left null space `N` of `Gamma_s` removes the state, so the residual
//! `v = N (y_s - H_u u_s) = W d_s + V f_s` with `W = N H_d`, `V = N H_f`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError, SymMatrix};

#[derive(Debug, Error)]
pub enum SysModelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("(C, A) is not observable (observability rank {rank} < {n_x})")]
    NotObservable { rank: usize, n_x: usize },
    #[error("the parity space is empty")]
    NoParityVectors,
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LtiSystem {
    #[serde(rename = "A", with = "linalg::serde_rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "linalg::serde_rows")]
    pub b: DMatrix<f64>,
    #[serde(rename = "B_d", with = "linalg::serde_rows")]
    pub b_d: DMatrix<f64>,
    #[serde(rename = "B_f", with = "linalg::serde_rows")]
    pub b_f: DMatrix<f64>,
    #[serde(rename = "C", with = "linalg::serde_rows")]
    pub c: DMatrix<f64>,
    #[serde(rename = "D", with = "linalg::serde_rows")]
    pub d: DMatrix<f64>,
    #[serde(rename = "D_d", with = "linalg::serde_rows")]
    pub d_d: DMatrix<f64>,
    #[serde(rename = "D_f", with = "linalg::serde_rows")]
    pub d_f: DMatrix<f64>,
    /// Sample time in seconds.
    pub dt: f64,
}

fn shape_check(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<(), SysModelError> {
    if m.shape() != (rows, cols) {
        return Err(SysModelError::InvalidInput(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SysModelError::InvalidInput(format!("{name} has non-finite entries")));
    }
    Ok(())
}

impl LtiSystem {
    /// Validates dimensions; `D`, `D_d`, `D_f` may be passed empty (0x0) for
    /// zero feedthrough.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        b_d: DMatrix<f64>,
        b_f: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        d_d: DMatrix<f64>,
        d_f: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self, SysModelError> {
        let n_y = c.nrows();
        let zero_if_empty = |m: DMatrix<f64>, cols: usize| {
            if m.is_empty() {
                DMatrix::zeros(n_y, cols)
            } else {
                m
            }
        };
        let sys = LtiSystem {
            d: zero_if_empty(d, b.ncols()),
            d_d: zero_if_empty(d_d, b_d.ncols()),
            d_f: zero_if_empty(d_f, b_f.ncols()),
            a,
            b,
            b_d,
            b_f,
            c,
            dt,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<(), SysModelError> {
        let n_x = self.a.nrows();
        if n_x == 0 {
            return Err(SysModelError::InvalidInput("A is empty".into()));
        }
        let (n_u, n_d, n_f, n_y) = (self.b.ncols(), self.b_d.ncols(), self.b_f.ncols(), self.c.nrows());
        shape_check("A", &self.a, n_x, n_x)?;
        shape_check("B", &self.b, n_x, n_u)?;
        shape_check("B_d", &self.b_d, n_x, n_d)?;
        shape_check("B_f", &self.b_f, n_x, n_f)?;
        shape_check("C", &self.c, n_y, n_x)?;
        shape_check("D", &self.d, n_y, n_u)?;
        shape_check("D_d", &self.d_d, n_y, n_d)?;
        shape_check("D_f", &self.d_f, n_y, n_f)?;
        if n_y == 0 {
            return Err(SysModelError::InvalidInput("C has no rows".into()));
        }
        if !(self.dt > 0.0) {
            return Err(SysModelError::InvalidInput(format!("sample time must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_d(&self) -> usize {
        self.b_d.ncols()
    }
    pub fn n_f(&self) -> usize {
        self.b_f.ncols()
    }
    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// `[C; C A; ...; C A^s]`.
    pub fn extended_observability(&self, s: usize) -> DMatrix<f64> {
        let (n_y, n_x) = (self.n_y(), self.n_x());
        let mut g = DMatrix::zeros((s + 1) * n_y, n_x);
        let mut ca = self.c.clone();
        for i in 0..=s {
            g.view_mut((i * n_y, 0), (n_y, n_x)).copy_from(&ca);
            ca = &ca * &self.a;
        }
        g
    }

    /// Block lower-triangular Toeplitz map of a stacked input sequence into
    /// the stacked output: `feed` on the diagonal, `C A^{i-1-j} input` below.
    fn toeplitz(&self, input: &DMatrix<f64>, feed: &DMatrix<f64>, s: usize) -> DMatrix<f64> {
        let (n_y, m) = (self.n_y(), input.ncols());
        let mut h = DMatrix::zeros((s + 1) * n_y, (s + 1) * m);
        let mut markov = Vec::with_capacity(s);
        let mut ca = self.c.clone();
        for _ in 0..s {
            markov.push(&ca * input);
            ca = &ca * &self.a;
        }
        for i in 0..=s {
            h.view_mut((i * n_y, i * m), (n_y, m)).copy_from(feed);
            for j in 0..i {
                h.view_mut((i * n_y, j * m), (n_y, m)).copy_from(&markov[i - 1 - j]);
            }
        }
        h
    }

    pub fn observability_rank(&self) -> usize {
        let g = self.extended_observability(self.n_x().saturating_sub(1));
        rank_of(&g)
    }
}

fn rank_of(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    sv.iter().filter(|&&v| v > 1e-10 * top).count()
}

/// Output sequence of the plant (one column per step) from `x0` (zero when
/// `None`). Input matrices hold one column per step and need at least
/// `horizon` columns; channels of width zero may be passed empty.
pub fn simulate_lti(
    sys: &LtiSystem,
    u: &DMatrix<f64>,
    d: &DMatrix<f64>,
    f: &DMatrix<f64>,
    horizon: usize,
    x0: Option<&DVector<f64>>,
) -> Result<DMatrix<f64>, SysModelError> {
    sys.validate()?;
    let check = |name: &str, m: &DMatrix<f64>, rows: usize| -> Result<(), SysModelError> {
        if rows == 0 {
            return Ok(());
        }
        if m.nrows() != rows || m.ncols() < horizon {
            return Err(SysModelError::InvalidInput(format!(
                "{name} sequence is {}x{}, need {rows} rows and at least {horizon} columns",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    };
    check("u", u, sys.n_u())?;
    check("d", d, sys.n_d())?;
    check("f", f, sys.n_f())?;
    let mut x = match x0 {
        Some(x0) if x0.len() == sys.n_x() => x0.clone(),
        Some(x0) => {
            return Err(SysModelError::InvalidInput(format!(
                "x0 has length {}, expected {}",
                x0.len(),
                sys.n_x()
            )))
        }
        None => DVector::zeros(sys.n_x()),
    };
    let col = |m: &DMatrix<f64>, rows: usize, k: usize| {
        if rows == 0 {
            DVector::zeros(0)
        } else {
            m.column(k).into_owned()
        }
    };
    let mut y = DMatrix::zeros(sys.n_y(), horizon);
    for k in 0..horizon {
        let (uk, dk, fk) = (col(u, sys.n_u(), k), col(d, sys.n_d(), k), col(f, sys.n_f(), k));
        let yk = &sys.c * &x + &sys.d * &uk + &sys.d_d * &dk + &sys.d_f * &fk;
        y.set_column(k, &yk);
        x = &sys.a * &x + &sys.b * &uk + &sys.b_d * &dk + &sys.b_f * &fk;
    }
    Ok(y)
}

/// Parity-space residual generator `v = N (y_s - H_u u_s) = W d_s + V f_s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualModel {
    /// Orthonormal rows annihilating the extended observability matrix.
    #[serde(rename = "N", with = "linalg::serde_rows")]
    pub parity: DMatrix<f64>,
    #[serde(rename = "W", with = "linalg::serde_rows")]
    pub w: DMatrix<f64>,
    #[serde(rename = "V", with = "linalg::serde_rows")]
    pub v: DMatrix<f64>,
    #[serde(rename = "H_u", with = "linalg::serde_rows")]
    pub h_u: DMatrix<f64>,
    pub s: usize,
    pub n_u: usize,
    pub n_y: usize,
}

impl ResidualModel {
    pub fn n_r(&self) -> usize {
        self.parity.nrows()
    }

    /// Disturbance dimension `n = n_d (s + 1)`.
    pub fn n(&self) -> usize {
        self.w.ncols()
    }

    /// Residual at step `k >= s` from measured outputs and inputs (one
    /// column per step).
    pub fn residual_at(&self, y: &DMatrix<f64>, u: &DMatrix<f64>, k: usize) -> DVector<f64> {
        let s = self.s;
        let ys = stack(y, k - s, s + 1);
        let mut z = ys;
        if self.n_u > 0 {
            z -= &self.h_u * stack(u, k - s, s + 1);
        }
        &self.parity * z
    }

    /// Residuals for every step `k = s, ..., N-1`.
    pub fn residuals(&self, y: &DMatrix<f64>, u: &DMatrix<f64>) -> Vec<DVector<f64>> {
        (self.s..y.ncols()).map(|k| self.residual_at(y, u, k)).collect()
    }

    /// Keeps the `n_keep` parity directions least excited by the
    /// disturbance (smallest eigenvalues of `W W^T`).
    pub fn reduced(&self, n_keep: usize) -> Result<ResidualModel, SysModelError> {
        if n_keep == 0 || n_keep > self.n_r() {
            return Err(SysModelError::InvalidInput(format!(
                "reduced dimension must be in 1..={}, got {n_keep}",
                self.n_r()
            )));
        }
        let gain = SymMatrix::symmetrized(&self.w * self.w.transpose());
        let e = linalg::sym_eig(&gain);
        let k = self.n_r();
        let basis = e.vectors.columns(k - n_keep, n_keep).transpose();
        let red = ResidualModel {
            parity: &basis * &self.parity,
            w: &basis * &self.w,
            v: &basis * &self.v,
            h_u: self.h_u.clone(),
            s: self.s,
            n_u: self.n_u,
            n_y: self.n_y,
        };
        if red.v.amax() <= 1e-12 * self.v.amax() {
            return Err(SysModelError::NoParityVectors);
        }
        Ok(red)
    }
}

/// Columns `start .. start + len` stacked into one vector.
fn stack(m: &DMatrix<f64>, start: usize, len: usize) -> DVector<f64> {
    let r = m.nrows();
    let mut out = DVector::zeros(r * len);
    for i in 0..len {
        out.rows_mut(i * r, r).copy_from(&m.column(start + i));
    }
    out
}

/// Builds the parity residual model of order `s` (requires `s >= n_x`).
pub fn parity_residual_model(sys: &LtiSystem, s: usize) -> Result<ResidualModel, SysModelError> {
    sys.validate()?;
    if s < sys.n_x() {
        return Err(SysModelError::InvalidInput(format!(
            "parity order s = {s} must be at least n_x = {}",
            sys.n_x()
        )));
    }
    let rank = sys.observability_rank();
    if rank < sys.n_x() {
        return Err(SysModelError::NotObservable { rank, n_x: sys.n_x() });
    }
    let gamma = sys.extended_observability(s);
    let m = gamma.nrows();
    let svd = gamma.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let r = svd.singular_values.iter().filter(|&&v| v > 1e-10 * top).count();
    if r >= m {
        return Err(SysModelError::NoParityVectors);
    }
    let u1 = u.columns(0, r).into_owned();
    let complement = SymMatrix::symmetrized(DMatrix::identity(m, m) - &u1 * u1.transpose());
    let e = linalg::sym_eig(&complement);
    let parity = e.vectors.columns(0, m - r).transpose();
    let h_u = sys.toeplitz(&sys.b, &sys.d, s);
    let h_d = sys.toeplitz(&sys.b_d, &sys.d_d, s);
    let h_f = sys.toeplitz(&sys.b_f, &sys.d_f, s);
    Ok(ResidualModel {
        w: &parity * h_d,
        v: &parity * h_f,
        parity,
        h_u,
        s,
        n_u: sys.n_u(),
        n_y: sys.n_y(),
    })
}

/// Disturbance law for the benchmark: every family is symmetric, unimodal
/// about zero and normalized to unit variance per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceFamily {
    Gaussian,
    /// `sqrt(v) z` with `z` standard normal and `v = 0.5` (prob. 0.9) or
    /// `v = 5.5` (prob. 0.1), one scale per time step.
    ScaleMixture,
    Laplace,
    Uniform,
}

impl DisturbanceFamily {
    pub const ALL: [DisturbanceFamily; 4] = [
        DisturbanceFamily::Gaussian,
        DisturbanceFamily::ScaleMixture,
        DisturbanceFamily::Laplace,
        DisturbanceFamily::Uniform,
    ];

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R, dim: usize) -> DVector<f64> {
        match self {
            DisturbanceFamily::Gaussian => DVector::from_fn(dim, |_, _| StandardNormal.sample(rng)),
            DisturbanceFamily::ScaleMixture => {
                let v: f64 = if rng.random::<f64>() < 0.1 { 5.5 } else { 0.5 };
                let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
                z * v.sqrt()
            }
            DisturbanceFamily::Laplace => {
                let e = Exp::new(std::f64::consts::SQRT_2).expect("positive rate");
                DVector::from_fn(dim, |_, _| e.sample(rng) - e.sample(rng))
            }
            DisturbanceFamily::Uniform => {
                let h = 3.0_f64.sqrt();
                DVector::from_fn(dim, |_, _| rng.random_range(-h..h))
            }
        }
    }
}

impl std::str::FromStr for DisturbanceFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "scale_mixture" | "scale-mixture" => Ok(Self::ScaleMixture),
            "laplace" => Ok(Self::Laplace),
            "uniform" => Ok(Self::Uniform),
            _ => Err(format!("unknown disturbance family `{s}`")),
        }
    }
}

/// Linearized three-tank network (tanks 1 -> 3 -> 2 -> outlet) around a
/// level operating point, discretized with a zero-order hold at 5 s.
/// Coefficients are synthetic. States: level deviations of tanks 1, 2, 3.
/// Inputs: pump flows into tanks 1 and 2. Outputs: levels of tanks 1 and 2.
/// Disturbance: process noise on each tank plus sensor noise on each
/// output (`n_d = 5`). Fault: additive leak from tank 3 (`B_f = -e3`).
pub fn three_tank_system() -> LtiSystem {
    let dt = 5.0;
    let (k13, k32, k20) = (0.0132, 0.0105, 0.0150);
    let ac = DMatrix::from_row_slice(
        3,
        3,
        &[-k13, 0.0, k13, 0.0, -(k32 + k20), k32, k13, k32, -(k13 + k32)],
    );
    let bc = DMatrix::from_row_slice(3, 2, &[0.065, 0.0, 0.0, 0.065, 0.0, 0.0]);
    // Zero-order hold via the exponential of [[Ac, Bc], [0, 0]] dt.
    let mut aug = DMatrix::zeros(5, 5);
    aug.view_mut((0, 0), (3, 3)).copy_from(&(&ac * dt));
    aug.view_mut((0, 3), (3, 2)).copy_from(&(&bc * dt));
    let e = aug.exp();
    let a = e.view((0, 0), (3, 3)).into_owned();
    let b = e.view((0, 3), (3, 2)).into_owned();
    let (sw, sv) = (0.01, 0.005);
    let mut b_d = DMatrix::zeros(3, 5);
    b_d.view_mut((0, 0), (3, 3)).copy_from(&(DMatrix::identity(3, 3) * sw));
    let mut d_d = DMatrix::zeros(2, 5);
    d_d.view_mut((0, 3), (2, 2)).copy_from(&(DMatrix::identity(2, 2) * sv));
    let b_f = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, -1.0]);
    let c = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    LtiSystem::new(a, b, b_d, b_f, c, DMatrix::zeros(0, 0), d_d, DMatrix::zeros(0, 0), dt)
        .expect("benchmark model is consistent")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// First test step (residual index) with the fault active.
    pub fault_onset: usize,
    pub fault_magnitude: f64,
    pub disturbance_family: DisturbanceFamily,
    pub s: usize,
    /// Keep only this many parity directions.
    pub residual_dim: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seed: 42,
            n_train: 2000,
            n_test: 1000,
            fault_onset: 200,
            fault_magnitude: 0.2,
            disturbance_family: DisturbanceFamily::ScaleMixture,
            s: 6,
            residual_dim: None,
        }
    }
}

/// Residual samples with per-sample fault labels (0 healthy, 1 faulty).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub residuals: Vec<DVector<f64>>,
    pub labels: Vec<u8>,
}

impl LabeledData {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.residuals.first().map_or(0, |r| r.len())
    }

    /// CSV with columns `k, v1, ..., v_nr, label`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["k".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("v{i}")));
        header.push("label".into());
        w.write_record(&header).expect("in-memory write");
        for (k, (r, l)) in self.residuals.iter().zip(&self.labels).enumerate() {
            let mut rec = vec![k.to_string()];
            rec.extend(r.iter().map(|v| v.to_string()));
            rec.push(l.to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SysModelError> {
        std::fs::write(path.as_ref(), self.to_csv())
            .map_err(|e| SysModelError::Dataset(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, SysModelError> {
        let bad = |e: String| SysModelError::Dataset(format!("{}: {e}", path.as_ref().display()));
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())
            .map_err(|e| bad(e.to_string()))?;
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let n = header.len();
        if n < 3 || &header[0] != "k" || &header[n - 1] != "label" {
            return Err(bad("expected columns k, v1.., label".into()));
        }
        let mut data = LabeledData {
            residuals: Vec::new(),
            labels: Vec::new(),
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let vals = (1..n - 1)
                .map(|i| rec[i].parse::<f64>().map_err(|_| bad(format!("bad number `{}`", &rec[i]))))
                .collect::<Result<Vec<_>, _>>()?;
            let label = match &rec[n - 1] {
                "0" => 0,
                "1" => 1,
                other => return Err(bad(format!("label must be 0 or 1, got `{other}`"))),
            };
            data.residuals.push(DVector::from_vec(vals));
            data.labels.push(label);
        }
        Ok(data)
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub system: LtiSystem,
    pub model: ResidualModel,
    /// Fault-free residuals `v0 = W d_s`.
    pub train: LabeledData,
    /// Residuals with the leak switched on at `fault_onset`.
    pub test: LabeledData,
}

/// Generates train and test residual datasets for the three-tank model by
/// simulating the plant under random piecewise-constant pump inputs and the
/// configured disturbance family. Deterministic in `config.seed`.
pub fn three_tank_benchmark(config: &BenchmarkConfig) -> Result<Benchmark, SysModelError> {
    if config.n_train == 0 || config.n_test == 0 {
        return Err(SysModelError::InvalidConfig("n_train and n_test must be positive".into()));
    }
    if config.fault_onset >= config.n_test {
        return Err(SysModelError::InvalidConfig(format!(
            "fault_onset {} must be below n_test {}",
            config.fault_onset, config.n_test
        )));
    }
    if !config.fault_magnitude.is_finite() {
        return Err(SysModelError::InvalidConfig("fault_magnitude must be finite".into()));
    }
    let system = three_tank_system();
    if config.s < system.n_x() {
        return Err(SysModelError::InvalidConfig(format!("s must be at least {}", system.n_x())));
    }
    let mut model = parity_residual_model(&system, config.s)?;
    if let Some(k) = config.residual_dim {
        model = model.reduced(k)?;
    }
    let run = |stream: u64, n: usize, onset: Option<usize>| -> Result<LabeledData, SysModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        let horizon = n + config.s;
        let mut u = DMatrix::zeros(system.n_u(), horizon);
        let mut level = DVector::zeros(system.n_u());
        for k in 0..horizon {
            if k % 20 == 0 {
                level = DVector::from_fn(system.n_u(), |_, _| rng.random_range(0.0..1.0));
            }
            u.set_column(k, &level);
        }
        let mut d = DMatrix::zeros(system.n_d(), horizon);
        for k in 0..horizon {
            d.set_column(k, &config.disturbance_family.sample(&mut rng, system.n_d()));
        }
        let mut f = DMatrix::zeros(system.n_f(), horizon);
        if let Some(onset) = onset {
            for k in (onset + config.s)..horizon {
                f.column_mut(k).fill(config.fault_magnitude);
            }
        }
        let x0 = DVector::from_fn(system.n_x(), |_, _| rng.random_range(-0.05..0.05));
        let y = simulate_lti(&system, &u, &d, &f, horizon, Some(&x0))?;
        let residuals = model.residuals(&y, &u);
        let labels = (0..n).map(|i| u8::from(onset.is_some_and(|o| i >= o))).collect();
        Ok(LabeledData { residuals, labels })
    };
    let train = run(1, config.n_train, None)?;
    let test = run(2, config.n_test, Some(config.fault_onset))?;
    Ok(Benchmark {
        system,
        model,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_system() -> LtiSystem {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        LtiSystem::new(m(0.5), m(0.0), m(1.0), m(0.0), m(1.0), m(0.0), m(0.0), m(1.0), 1.0).unwrap()
    }

    #[test]
    fn scalar_recursion() {
        let sys = scalar_system();
        let d = DMatrix::from_element(1, 4, 1.0);
        let z = DMatrix::zeros(1, 4);
        let y = simulate_lti(&sys, &z, &d, &z, 4, None).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 1.0, 1.5, 1.75]);
    }

    #[test]
    fn fault_feedthrough_step() {
        let sys = scalar_system();
        let z = DMatrix::zeros(1, 6);
        let mut f = DMatrix::zeros(1, 6);
        f.columns_mut(3, 3).fill(2.0);
        let y = simulate_lti(&sys, &z, &z, &f, 6, None).unwrap();
        assert_eq!(y[(0, 2)], 0.0);
        assert_eq!(y[(0, 3)], 2.0);
    }

    #[test]
    fn zero_plant_gives_zero_output() {
        let sys = LtiSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 0),
            1.0,
        )
        .unwrap();
        let z = DMatrix::zeros(1, 5);
        let y = simulate_lti(&sys, &z, &z, &z, 5, None).unwrap();
        assert_eq!(y, DMatrix::zeros(2, 5));
    }

    #[test]
    fn dimension_errors() {
        let sys = scalar_system();
        let z = DMatrix::zeros(1, 2);
        assert!(matches!(
            simulate_lti(&sys, &z, &z, &z, 5, None),
            Err(SysModelError::InvalidInput(_))
        ));
    }

    #[test]
    fn three_tank_parity_dimensions() {
        let sys = three_tank_system();
        assert_eq!(sys.observability_rank(), 3);
        let m = parity_residual_model(&sys, 6).unwrap();
        assert_eq!(m.n_r(), 11);
        assert_eq!(m.n(), 35);
        assert_eq!(m.v.shape(), (11, 7));
        let g = sys.extended_observability(6);
        assert!((&m.parity * &g).norm() <= 1e-9 * g.norm());
        let nnt = &m.parity * m.parity.transpose();
        assert_relative_eq!(nnt, DMatrix::identity(11, 11), epsilon = 1e-12);
        let red = m.reduced(9).unwrap();
        assert_eq!(red.n_r(), 9);
        assert!((&red.parity * &g).norm() <= 1e-9 * g.norm());
    }

    #[test]
    fn unobservable_pair_is_rejected() {
        let sys = LtiSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 0),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            parity_residual_model(&sys, 3),
            Err(SysModelError::NotObservable { rank: 1, n_x: 2 })
        ));
    }

    #[test]
    fn benchmark_onset_must_fit() {
        let cfg = BenchmarkConfig {
            fault_onset: 10,
            n_test: 10,
            ..BenchmarkConfig::default()
        };
        assert!(matches!(three_tank_benchmark(&cfg), Err(SysModelError::InvalidConfig(_))));
    }
}
