//! Moment ambiguity sets with optional unimodality and support information.
//!
//! An [`AmbiguitySet`] collects every distribution of the (zero-mean)
//! disturbance with second moment at most `gamma2 * S0`, optionally restricted
//! to be alpha-unimodal about the origin and supported on an intersection of
//! ellipsoids. Data are centered at ingestion, so the nominal mean is zero
//! throughout the crate.
//!
//! `gamma1` is stored and validated but no bound in this crate reads it: with
//! a zero nominal mean every implemented tail bound depends on `gamma2` only.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{self, LinalgError, SymMatrix};

#[derive(Debug, Error)]
pub enum AmbiguityError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("sample covariance is rank deficient (min eigenvalue {min_eig:e})")]
    DegenerateCovariance { min_eig: f64 },
    #[error("coordinate {axis} is identically zero; drop or regularize it")]
    ZeroWidthAxis { axis: usize },
    #[error("invalid ambiguity set: {0}")]
    Invalid(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Degree of unimodality. `Infinite` removes the unimodality restriction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Infinite,
}

impl Alpha {
    pub fn finite(self) -> Option<f64> {
        match self {
            Alpha::Finite(a) => Some(a),
            Alpha::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Alpha::Infinite)
    }

    /// Moment inflation `(alpha + 2) / alpha` between a unimodal distribution
    /// and its radial mixing distribution; 1 for infinite alpha.
    pub fn moment_inflation(self) -> f64 {
        match self {
            Alpha::Finite(a) => (a + 2.0) / a,
            Alpha::Infinite => 1.0,
        }
    }

    fn validate(self) -> Result<(), String> {
        match self {
            Alpha::Finite(a) if !(a > 0.0) || !a.is_finite() => {
                Err(format!("alpha must be positive and finite or `inf`, got {a}"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Alpha {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Alpha::Infinite);
        }
        let a: f64 = t.parse().map_err(|_| format!("bad alpha `{s}`"))?;
        if a.is_infinite() && a > 0.0 {
            return Ok(Alpha::Infinite);
        }
        let alpha = Alpha::Finite(a);
        alpha.validate()?;
        Ok(alpha)
    }
}

// JSON has no infinity, so the sentinel is the string "inf".
impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => s.serialize_f64(*a),
            Alpha::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) => {
                let alpha = Alpha::Finite(a);
                alpha.validate().map_err(serde::de::Error::custom)?;
                Ok(alpha)
            }
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One ellipsoid `{xi : (xi - a)^T Theta (xi - a) <= 1}`. A rank-deficient
/// `Theta` is legal and encodes a slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipsoid {
    #[serde(with = "linalg::serde_vec")]
    pub a: DVector<f64>,
    #[serde(rename = "Theta")]
    pub theta: SymMatrix,
}

impl Ellipsoid {
    pub fn new(a: DVector<f64>, theta: SymMatrix) -> Result<Self, AmbiguityError> {
        if a.len() != theta.dim() {
            return Err(AmbiguityError::Invalid(format!(
                "ellipsoid center has length {} but Theta is {}x{}",
                a.len(),
                theta.dim(),
                theta.dim()
            )));
        }
        if !theta.is_psd(1e-10) {
            return Err(AmbiguityError::Invalid("ellipsoid Theta must be PSD".into()));
        }
        Ok(Ellipsoid { a, theta })
    }

    /// `(xi - a)^T Theta (xi - a) - 1`; nonpositive inside.
    pub fn excess(&self, xi: &DVector<f64>) -> f64 {
        let d = xi - &self.a;
        self.theta.quad_form(&d) - 1.0
    }

    /// The lifted matrix `[[Theta, -Theta a], [-a^T Theta, a^T Theta a - 1]]`
    /// whose quadratic form in `(xi, 1)` equals [`Ellipsoid::excess`].
    pub fn lifted(&self) -> DMatrix<f64> {
        let n = self.a.len();
        let th = self.theta.matrix();
        let ta = th * &self.a;
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(th);
        for i in 0..n {
            m[(i, n)] = -ta[i];
            m[(n, i)] = -ta[i];
        }
        m[(n, n)] = self.a.dot(&ta) - 1.0;
        m
    }
}

/// Intersection of ellipsoids; the empty list means all of R^n.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet {
    pub ellipsoids: Vec<Ellipsoid>,
}

impl SupportSet {
    pub fn unbounded() -> Self {
        SupportSet::default()
    }

    pub fn is_unbounded(&self) -> bool {
        self.ellipsoids.is_empty()
    }

    pub fn contains(&self, xi: &DVector<f64>, tol: f64) -> bool {
        self.ellipsoids.iter().all(|e| e.excess(xi) <= tol)
    }

    /// Euclidean ball of the given radius around the origin.
    pub fn ball(n: usize, radius: f64) -> Self {
        let theta = SymMatrix::identity(n).scale(1.0 / (radius * radius));
        SupportSet {
            ellipsoids: vec![Ellipsoid {
                a: DVector::zeros(n),
                theta,
            }],
        }
    }

    /// Axis-aligned box `|xi_i| <= half_width_i`, one rank-1 slab per axis.
    pub fn centered_box(half_widths: &[f64]) -> Result<Self, AmbiguityError> {
        let n = half_widths.len();
        let mut ellipsoids = Vec::with_capacity(n);
        for (i, &w) in half_widths.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(AmbiguityError::ZeroWidthAxis { axis: i });
            }
            let mut th = DMatrix::zeros(n, n);
            th[(i, i)] = 1.0 / (w * w);
            ellipsoids.push(Ellipsoid {
                a: DVector::zeros(n),
                theta: SymMatrix::symmetrized(th),
            });
        }
        Ok(SupportSet { ellipsoids })
    }

    /// Applies the change of variables `xi = T z` and returns the support
    /// expressed in `z`.
    pub fn transformed(&self, t: &DMatrix<f64>, t_inv: &DMatrix<f64>) -> SupportSet {
        SupportSet {
            ellipsoids: self
                .ellipsoids
                .iter()
                .map(|e| Ellipsoid {
                    a: t_inv * &e.a,
                    theta: e.theta.congruence(t),
                })
                .collect(),
        }
    }
}

/// Moment/unimodality/support ambiguity set with zero nominal mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbiguitySet {
    #[serde(with = "linalg::serde_vec")]
    mu0: DVector<f64>,
    #[serde(rename = "S0")]
    s0: SymMatrix,
    gamma1: f64,
    gamma2: f64,
    alpha: Alpha,
    support: SupportSet,
}

impl AmbiguitySet {
    pub fn new(
        s0: SymMatrix,
        gamma1: f64,
        gamma2: f64,
        alpha: Alpha,
        support: SupportSet,
    ) -> Result<Self, AmbiguityError> {
        let n = s0.dim();
        if n == 0 {
            return Err(AmbiguityError::Invalid("S0 must be at least 1x1".into()));
        }
        if !(gamma1 >= 0.0) || !gamma1.is_finite() {
            return Err(AmbiguityError::Invalid(format!("gamma1 must be >= 0, got {gamma1}")));
        }
        if !gamma2.is_finite() || gamma2 < gamma1.max(1.0) {
            return Err(AmbiguityError::Invalid(format!(
                "gamma2 must be >= max(gamma1, 1) = {}, got {gamma2}",
                gamma1.max(1.0)
            )));
        }
        alpha.validate().map_err(AmbiguityError::Invalid)?;
        let min_eig = s0.min_eigenvalue();
        let max_abs = s0.matrix().amax();
        if !(min_eig > linalg::RANK_TOL * max_abs) {
            return Err(AmbiguityError::Invalid(format!(
                "S0 must be positive definite (min eigenvalue {min_eig:e})"
            )));
        }
        for e in &support.ellipsoids {
            if e.a.len() != n {
                return Err(AmbiguityError::Invalid(format!(
                    "support ellipsoid has dimension {} but S0 is {n}x{n}",
                    e.a.len()
                )));
            }
        }
        Ok(AmbiguitySet {
            mu0: DVector::zeros(n),
            s0,
            gamma1,
            gamma2,
            alpha,
            support,
        })
    }

    /// Moment-only set with unbounded support: `gamma1 = 0`.
    pub fn moments(s0: SymMatrix, gamma2: f64, alpha: Alpha) -> Result<Self, AmbiguityError> {
        AmbiguitySet::new(s0, 0.0, gamma2, alpha, SupportSet::unbounded())
    }

    pub fn dim(&self) -> usize {
        self.s0.dim()
    }

    pub fn s0(&self) -> &SymMatrix {
        &self.s0
    }

    /// `S0^alpha = (alpha + 2) / alpha * S0`, the second moment of the radial
    /// mixing distribution. Equals `S0` for infinite alpha.
    pub fn s0_alpha(&self) -> SymMatrix {
        self.s0.scale(self.alpha.moment_inflation())
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn with_alpha(&self, alpha: Alpha) -> Result<Self, AmbiguityError> {
        alpha.validate().map_err(AmbiguityError::Invalid)?;
        let mut out = self.clone();
        out.alpha = alpha;
        Ok(out)
    }

    pub fn with_support(&self, support: SupportSet) -> Result<Self, AmbiguityError> {
        AmbiguitySet::new(self.s0.clone(), self.gamma1, self.gamma2, self.alpha, support)
    }

    pub fn without_support(&self) -> Self {
        let mut out = self.clone();
        out.support = SupportSet::unbounded();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ambiguity set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AmbiguityError> {
        serde_json::from_str(text).map_err(|e| AmbiguityError::Invalid(e.to_string()))
    }
}

impl<'de> Deserialize<'de> for AmbiguitySet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            #[serde(default)]
            mu0: Option<Vec<f64>>,
            #[serde(rename = "S0")]
            s0: SymMatrix,
            #[serde(default)]
            gamma1: f64,
            gamma2: f64,
            alpha: Alpha,
            #[serde(default)]
            support: SupportSet,
        }
        let raw = Raw::deserialize(d)?;
        if let Some(mu) = &raw.mu0 {
            if mu.len() != raw.s0.dim() || mu.iter().any(|m| m.abs() > 1e-12) {
                return Err(serde::de::Error::custom(
                    "mu0 must be the zero vector; center the data before building the set",
                ));
            }
        }
        AmbiguitySet::new(raw.s0, raw.gamma1, raw.gamma2, raw.alpha, raw.support)
            .map_err(serde::de::Error::custom)
    }
}

fn check_samples(samples: &[DVector<f64>]) -> Result<usize, AmbiguityError> {
    let n = samples.first().map_or(0, DVector::len);
    if samples.is_empty() || n == 0 {
        return Err(AmbiguityError::InsufficientData { needed: 1, got: 0 });
    }
    if samples.iter().any(|s| s.len() != n) {
        return Err(AmbiguityError::Dataset("samples have inconsistent lengths".into()));
    }
    if samples.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(AmbiguityError::Dataset("non-finite sample entry".into()));
    }
    Ok(n)
}

fn mean_and_scatter(samples: &[DVector<f64>], idx: impl Iterator<Item = usize> + Clone) -> (DVector<f64>, DMatrix<f64>) {
    let n = samples[0].len();
    let count = idx.clone().count() as f64;
    let mut mu = DVector::zeros(n);
    for i in idx.clone() {
        mu += &samples[i];
    }
    mu /= count;
    let mut s = DMatrix::zeros(n, n);
    for i in idx {
        let d = &samples[i] - &mu;
        s.ger(1.0, &d, &d, 1.0);
    }
    s /= count - 1.0;
    (mu, s)
}

/// Sample mean and `(N-1)`-normalized scatter about it.
pub fn estimate_moments(samples: &[DVector<f64>]) -> Result<(DVector<f64>, SymMatrix), AmbiguityError> {
    let n = check_samples(samples)?;
    if samples.len() < n + 1 {
        return Err(AmbiguityError::InsufficientData {
            needed: n + 1,
            got: samples.len(),
        });
    }
    let (mu, s) = mean_and_scatter(samples, 0..samples.len());
    let s0 = SymMatrix::symmetrized(s);
    let eig = linalg::sym_eig(&s0);
    let lmax = eig.values[0];
    let lmin = eig.values[n - 1];
    if lmax <= 0.0 || lmin <= 1e-10 * lmax {
        return Err(AmbiguityError::DegenerateCovariance { min_eig: lmin });
    }
    Ok((mu, s0))
}

/// Subtracts the sample mean from every sample.
pub fn center_samples(samples: &[DVector<f64>]) -> Result<Vec<DVector<f64>>, AmbiguityError> {
    check_samples(samples)?;
    let mut mu = DVector::zeros(samples[0].len());
    for s in samples {
        mu += s;
    }
    mu /= samples.len() as f64;
    Ok(samples.iter().map(|s| s - &mu).collect())
}

/// Empirical quantile: the `ceil(q * n)`-th order statistic.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Percentile bootstrap for the size parameters `(gamma1, gamma2)`.
///
/// Each of the `resamples` draws `N` samples with replacement and records the
/// mean deviation `(mu_b - mu_0)^T S0^{-1} (mu_b - mu_0)` and the largest
/// generalized eigenvalue of `S_b + (mu_b - mu_0)(mu_b - mu_0)^T` against
/// `S0`. The `confidence`-quantiles give `gamma1` and `gamma2`, with
/// `gamma2 >= max(gamma1, 1)` enforced.
pub fn bootstrap_gamma(
    samples: &[DVector<f64>],
    confidence: f64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64), AmbiguityError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(AmbiguityError::Invalid(format!("confidence must be in (0,1), got {confidence}")));
    }
    if resamples < 100 {
        return Err(AmbiguityError::Invalid(format!("need at least 100 resamples, got {resamples}")));
    }
    let (mu0, s0) = estimate_moments(samples)?;
    let s0_inv = linalg::spd_inverse(&s0)?;
    let big_n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stat1 = Vec::with_capacity(resamples);
    let mut stat2 = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; big_n];
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..big_n);
        }
        let (mu_b, mut s_b) = mean_and_scatter(samples, idx.iter().copied());
        let d = &mu_b - &mu0;
        stat1.push(s0_inv.quad_form(&d));
        s_b.ger(1.0, &d, &d, 1.0);
        let (omega, _) = linalg::gen_eig_largest(&SymMatrix::symmetrized(s_b), &s0)?;
        stat2.push(omega);
    }
    stat1.sort_by(f64::total_cmp);
    stat2.sort_by(f64::total_cmp);
    let gamma1 = quantile(&stat1, confidence);
    let gamma2 = quantile(&stat2, confidence).max(gamma1).max(1.0);
    Ok((gamma1, gamma2))
}

/// Axis-aligned box support `|xi_i| <= inflate * max_k |xi_i^(k)|`, encoded
/// as one rank-1 ellipsoid (slab) per coordinate.
pub fn box_support_from_samples(samples: &[DVector<f64>], inflate: f64) -> Result<SupportSet, AmbiguityError> {
    let n = check_samples(samples)?;
    if !(inflate >= 1.0) || !inflate.is_finite() {
        return Err(AmbiguityError::Invalid(format!("inflation factor must be >= 1, got {inflate}")));
    }
    let mut widths = vec![0.0_f64; n];
    for s in samples {
        for (w, v) in widths.iter_mut().zip(s.iter()) {
            *w = w.max(v.abs());
        }
    }
    if let Some(axis) = widths.iter().position(|&w| w == 0.0) {
        return Err(AmbiguityError::ZeroWidthAxis { axis });
    }
    let half: Vec<f64> = widths.iter().map(|w| w * inflate).collect();
    SupportSet::centered_box(&half)
}

/// Recipe for fitting an ambiguity set to fault-free samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub confidence: f64,
    pub resamples: usize,
    pub seed: u64,
    /// Box support inflation; `None` leaves the support unbounded.
    pub box_inflation: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            confidence: 0.95,
            resamples: 500,
            seed: 7,
            box_inflation: Some(1.2),
        }
    }
}

/// Sample covariance as `S0`, bootstrap `(gamma1, gamma2)` and an optional
/// box support from the samples. The samples should already be centered at
/// the nominal (zero) mean.
pub fn fit_ambiguity(samples: &[DVector<f64>], alpha: Alpha, opts: &FitOptions) -> Result<AmbiguitySet, AmbiguityError> {
    let (_, s0) = estimate_moments(samples)?;
    let (gamma1, gamma2) = bootstrap_gamma(samples, opts.confidence, opts.resamples, opts.seed)?;
    let support = match opts.box_inflation {
        Some(k) => box_support_from_samples(samples, k)?,
        None => SupportSet::unbounded(),
    };
    AmbiguitySet::new(s0, gamma1, gamma2, alpha, support)
}

/// Reads a headered CSV with one sample per row. Returns column names and
/// the samples.
pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<DVector<f64>>), AmbiguityError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| AmbiguityError::Dataset(format!("{}: {e}", path.as_ref().display())))?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| AmbiguityError::Dataset(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AmbiguityError::Dataset(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| AmbiguityError::Dataset(format!("bad number `{f}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        samples.push(DVector::from_vec(row));
    }
    Ok((names, samples))
}

pub fn write_samples_csv(
    path: impl AsRef<Path>,
    names: &[String],
    samples: &[DVector<f64>],
) -> Result<(), AmbiguityError> {
    let mut w = csv::Writer::from_path(path.as_ref())
        .map_err(|e| AmbiguityError::Dataset(format!("{}: {e}", path.as_ref().display())))?;
    w.write_record(names).map_err(|e| AmbiguityError::Dataset(e.to_string()))?;
    for s in samples {
        w.write_record(s.iter().map(|v| format!("{v:e}")))
            .map_err(|e| AmbiguityError::Dataset(e.to_string()))?;
    }
    w.flush().map_err(|e| AmbiguityError::Dataset(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_samples(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn moments_of_the_cross() {
        let s = vec![dvector![1.0, 0.0], dvector![-1.0, 0.0], dvector![0.0, 1.0], dvector![0.0, -1.0]];
        let (mu, s0) = estimate_moments(&s).unwrap();
        assert_eq!(mu, dvector![0.0, 0.0]);
        assert_relative_eq!(s0.matrix(), &(DMatrix::identity(2, 2) * (2.0 / 3.0)), epsilon = 1e-15);
    }

    #[test]
    fn repeated_sample_is_degenerate() {
        let s = vec![dvector![1.0, 2.0]; 5];
        assert!(matches!(estimate_moments(&s), Err(AmbiguityError::DegenerateCovariance { .. })));
        assert!(matches!(
            estimate_moments(&s[..2]),
            Err(AmbiguityError::InsufficientData { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn gaussian_scatter_is_near_identity() {
        let s = gaussian_samples(3, 10_000, 7);
        let (_, s0) = estimate_moments(&s).unwrap();
        let err = (s0.matrix() - DMatrix::<f64>::identity(3, 3)).amax();
        assert!(err < 0.1, "max deviation {err}");
    }

    #[test]
    fn bootstrap_clamps_gamma2_to_one() {
        // Every resample of {-1, 1} has covariance plus mean shift at most S0.
        let s = vec![dvector![-1.0], dvector![1.0]];
        let (g1, g2) = bootstrap_gamma(&s, 0.95, 100, 3).unwrap();
        assert!(g1 >= 0.0);
        assert_eq!(g2, g1.max(1.0));
    }

    #[test]
    fn bootstrap_gaussian_regression() {
        let s = gaussian_samples(2, 500, 11);
        let (g1, g2) = bootstrap_gamma(&s, 0.95, 200, 5).unwrap();
        assert!(g2 > 1.0 && g2 < 2.0, "gamma2 = {g2}");
        assert!(g1 > 0.0 && g1 < 0.05, "gamma1 = {g1}");
        // Deterministic for a fixed seed.
        assert_eq!(bootstrap_gamma(&s, 0.95, 200, 5).unwrap(), (g1, g2));
    }

    #[test]
    fn bootstrap_small_confidence_tends_to_minimum() {
        let s = gaussian_samples(2, 200, 2);
        let (g1_lo, g2_lo) = bootstrap_gamma(&s, 1e-9, 100, 1).unwrap();
        let (g1_hi, _) = bootstrap_gamma(&s, 0.99, 100, 1).unwrap();
        assert!(g1_lo <= g1_hi);
        assert!(g2_lo >= 1.0);
    }

    #[test]
    fn box_support_widths() {
        let s = vec![dvector![1.0, -2.0], dvector![-0.5, 1.0]];
        let sup = box_support_from_samples(&s, 1.2).unwrap();
        assert_eq!(sup.ellipsoids.len(), 2);
        assert_relative_eq!(sup.ellipsoids[0].theta.matrix()[(0, 0)], 1.0 / (1.2 * 1.2), epsilon = 1e-15);
        assert_relative_eq!(sup.ellipsoids[1].theta.matrix()[(1, 1)], 1.0 / (2.4 * 2.4), epsilon = 1e-15);
        assert!(sup.contains(&dvector![1.2, 2.4], 1e-12));
        assert!(!sup.contains(&dvector![1.3, 0.0], 1e-12));

        let tight = box_support_from_samples(&s, 1.0).unwrap();
        assert!(s.iter().all(|x| tight.contains(x, 1e-12)));
        assert!(!tight.contains(&dvector![1.01, 0.0], 1e-12));

        let zeros = vec![dvector![0.0, 0.0]; 3];
        assert!(matches!(
            box_support_from_samples(&zeros, 1.2),
            Err(AmbiguityError::ZeroWidthAxis { axis: 0 })
        ));
    }

    #[test]
    fn rejects_small_gamma2() {
        let s0 = SymMatrix::identity(2);
        assert!(AmbiguitySet::new(s0.clone(), 0.0, 0.9, Alpha::Infinite, SupportSet::unbounded()).is_err());
        assert!(AmbiguitySet::new(s0.clone(), 2.0, 1.5, Alpha::Infinite, SupportSet::unbounded()).is_err());
        assert!(AmbiguitySet::new(s0, 2.0, 2.0, Alpha::Finite(1.0), SupportSet::unbounded()).is_ok());
    }

    #[test]
    fn json_round_trip_keeps_infinite_alpha() {
        let sup = SupportSet::centered_box(&[1.0, 2.0]).unwrap();
        let amb = AmbiguitySet::new(SymMatrix::from_diagonal(&[1.0, 2.0]), 0.1, 1.5, Alpha::Infinite, sup).unwrap();
        let text = amb.to_json();
        assert!(text.contains("\"inf\""));
        assert_eq!(AmbiguitySet::from_json(&text).unwrap(), amb);

        let bad = text.replace("\"mu0\": [\n    0.0,", "\"mu0\": [\n    0.5,");
        assert!(AmbiguitySet::from_json(&bad).is_err());
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!("inf".parse::<Alpha>().unwrap(), Alpha::Infinite);
        assert_eq!("9".parse::<Alpha>().unwrap(), Alpha::Finite(9.0));
        assert!("0".parse::<Alpha>().is_err());
        assert!("-1".parse::<Alpha>().is_err());
    }
}
