//! Sampling-based checks of the bounds and designs.
//!
//! Every `alpha`-unimodal law is a mixture of radial laws on segments
//! `[0, w]`, along which the radius is distributed as `U^{1/alpha} |w|`.
//! [`calibrated_mixture`] builds such mixtures with a prescribed second
//! moment, so they belong to the moment ambiguity set; Monte Carlo tails of
//! these mixtures must then stay below the bounds. The module also carries
//! the empirical FAR/FDR evaluation of a residual generator and the
//! chi-square GLRT baseline.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::ambiguity::{Alpha, SupportSet};
use crate::bounds::EllipsoidRegion;
use crate::linalg::{self, LinalgError, SymMatrix};
use crate::sysmodel::LabeledData;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Minimum sample count for [`monte_carlo_tail`].
pub const MIN_MC_SAMPLES: usize = 10_000;
/// Samples per independent stream; estimates do not depend on the thread
/// count.
const CHUNK: usize = 1 << 16;

/// Draws from the radial law on `[0, w]`: `lambda w` with
/// `lambda = U^{1/alpha}` (`lambda = 1` for infinite alpha).
pub fn sample_radial<R: Rng + ?Sized>(w: &DVector<f64>, alpha: Alpha, rng: &mut R) -> DVector<f64> {
    w * radial_scale(alpha, rng)
}

fn radial_scale<R: Rng + ?Sized>(alpha: Alpha, rng: &mut R) -> f64 {
    match alpha {
        Alpha::Infinite => 1.0,
        Alpha::Finite(a) => {
            // U in (0, 1]: 1 - [0, 1).
            let u: f64 = 1.0 - rng.random::<f64>();
            (u.ln() / a).exp()
        }
    }
}

/// Finite mixture `sum_j p_j delta^alpha_[0, w_j]` of radial laws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialMixture {
    #[serde(with = "atoms_serde")]
    pub atoms: Vec<DVector<f64>>,
    pub probs: Vec<f64>,
    pub alpha: Alpha,
}

mod atoms_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = v.iter().map(|a| a.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Ok(rows.into_iter().map(DVector::from_vec).collect())
    }
}

impl RadialMixture {
    pub fn new(atoms: Vec<DVector<f64>>, probs: Vec<f64>, alpha: Alpha) -> Result<Self, VerifyError> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(VerifyError::InvalidMixture(format!(
                "{} atoms with {} probabilities",
                atoms.len(),
                probs.len()
            )));
        }
        let n = atoms[0].len();
        if atoms.iter().any(|a| a.len() != n || a.iter().any(|v| !v.is_finite())) {
            return Err(VerifyError::InvalidMixture("atoms must be finite and of equal length".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(VerifyError::InvalidMixture("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(VerifyError::InvalidMixture(format!("probabilities sum to {total}")));
        }
        if let Alpha::Finite(a) = alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(VerifyError::InvalidMixture(format!("alpha must be positive, got {a}")));
            }
        }
        Ok(RadialMixture { atoms, probs, alpha })
    }

    /// The point mass at the origin.
    pub fn dirac(n: usize, alpha: Alpha) -> Self {
        RadialMixture {
            atoms: vec![DVector::zeros(n)],
            probs: vec![1.0],
            alpha,
        }
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    /// `E[xi xi^T] = alpha / (alpha + 2) sum_j p_j w_j w_j^T`.
    pub fn second_moment(&self) -> SymMatrix {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (w, p) in self.atoms.iter().zip(&self.probs) {
            m.ger(*p, w, w, 1.0);
        }
        let k = match self.alpha {
            Alpha::Finite(a) => a / (a + 2.0),
            Alpha::Infinite => 1.0,
        };
        SymMatrix::symmetrized(m * k)
    }

    /// `E[xi] = alpha / (alpha + 1) sum_j p_j w_j`.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim());
        for (w, p) in self.atoms.iter().zip(&self.probs) {
            m.axpy(*p, w, 1.0);
        }
        let k = match self.alpha {
            Alpha::Finite(a) => a / (a + 1.0),
            Alpha::Infinite => 1.0,
        };
        m * k
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let w = &self.atoms[self.pick(rng)];
        sample_radial(w, self.alpha, rng)
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    /// Every segment `[0, w_j]` lies in the (star-shaped) support.
    pub fn within(&self, support: &SupportSet, tol: f64) -> bool {
        self.atoms.iter().all(|w| support.contains(w, tol))
    }

    /// Shrinks all atoms by the largest common factor in `(0, 1]` that puts
    /// them inside `support`; the second moment only decreases.
    pub fn fit_to_support(&self, support: &SupportSet) -> RadialMixture {
        let mut factor: f64 = 1.0;
        for w in &self.atoms {
            if support.contains(&(w * factor), 0.0) {
                continue;
            }
            let (mut lo, mut hi) = (0.0, factor);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if support.contains(&(w * mid), 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            factor = lo;
        }
        RadialMixture {
            atoms: self.atoms.iter().map(|w| w * factor).collect(),
            probs: self.probs.clone(),
            alpha: self.alpha,
        }
    }
}

/// Symmetric radial mixture whose law has mean zero and second moment
/// exactly `target` (so, for `target = gamma2 S0`, it lies in the moment
/// set). Random directions `u_j` with random pair weights `p_j` are
/// whitened by their own scatter `S_u = sum 2 p_j u_j u_j^T` and mapped to
/// `w_j = L S_u^{-1/2} u_j` with `L L^T` the mixing moment
/// `(alpha + 2) / alpha * target`; atoms come in `+-w_j` pairs.
pub fn calibrated_mixture(
    target: &SymMatrix,
    alpha: Alpha,
    n_atoms: usize,
    seed: u64,
) -> Result<RadialMixture, VerifyError> {
    let n = target.dim();
    if n == 0 {
        return Err(VerifyError::CalibrationFailed("empty target".into()));
    }
    if n_atoms < 2 * n || n_atoms % 2 != 0 {
        return Err(VerifyError::CalibrationFailed(format!(
            "need an even number of at least {} atoms, got {n_atoms}",
            2 * n
        )));
    }
    if !target.is_psd(1e-12) {
        return Err(VerifyError::CalibrationFailed(format!(
            "target is not PSD (min eigenvalue {:e})",
            target.min_eigenvalue()
        )));
    }
    let inflation = alpha.moment_inflation();
    if target.matrix().amax() == 0.0 {
        return RadialMixture::new(vec![DVector::zeros(n)], vec![1.0], alpha);
    }
    let root = linalg::psd_sqrt(&target.scale(inflation))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = n_atoms / 2;
    let dirs: Vec<DVector<f64>> = (0..pairs)
        .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    let raw: Vec<f64> = (0..pairs).map(|_| 0.5 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let mut su = DMatrix::zeros(n, n);
    for (u, p) in dirs.iter().zip(&weights) {
        su.ger(*p, u, u, 1.0);
    }
    let su = SymMatrix::symmetrized(su);
    let (_, su_inv_root) = linalg::psd_sqrt_inv(&su).map_err(|e| VerifyError::CalibrationFailed(e.to_string()))?;
    let map = root.matrix() * su_inv_root.matrix();
    let mut atoms = Vec::with_capacity(n_atoms);
    let mut probs = Vec::with_capacity(n_atoms);
    for (u, p) in dirs.iter().zip(&weights) {
        let w = &map * u;
        atoms.push(-&w);
        atoms.push(w);
        probs.push(p / 2.0);
        probs.push(p / 2.0);
    }
    RadialMixture::new(atoms, probs, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub n_samples: usize,
    pub std_error: f64,
}

impl McEstimate {
    pub fn from_count(hits: usize, n_samples: usize) -> Self {
        let value = hits as f64 / n_samples as f64;
        McEstimate {
            value,
            n_samples,
            std_error: (value * (1.0 - value) / n_samples as f64).sqrt(),
        }
    }
}

/// Runs `f` on `n` draws split into fixed-size chunks, chunk `c` using the
/// ChaCha8 stream `c` of `seed`, and sums the counts.
fn chunked_count<F>(n: usize, seed: u64, f: F) -> usize
where
    F: Fn(&mut ChaCha8Rng, usize) -> usize + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            f(&mut rng, len)
        })
        .sum()
}

/// Empirical `P{xi^T M xi > j_th}` under the mixture.
pub fn monte_carlo_tail(
    mixture: &RadialMixture,
    region: &EllipsoidRegion,
    j_th: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, VerifyError> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(VerifyError::TooFewSamples {
            needed: MIN_MC_SAMPLES,
            got: n_samples,
        });
    }
    if region.dim() != mixture.dim() {
        return Err(VerifyError::DimensionMismatch(format!(
            "region is {} but the mixture is {}",
            region.dim(),
            mixture.dim()
        )));
    }
    // xi^T M xi = lambda^2 w^T M w, so only the quadratic value per atom matters.
    let quad: Vec<f64> = mixture.atoms.iter().map(|w| region.m().quad_form(w)).collect();
    let hits = chunked_count(n_samples, seed, |rng, len| {
        let mut hits = 0;
        for _ in 0..len {
            let j = mixture.pick(rng);
            let l = radial_scale(mixture.alpha, rng);
            if l * l * quad[j] > j_th {
                hits += 1;
            }
        }
        hits
    });
    Ok(McEstimate::from_count(hits, n_samples))
}

/// One bound-versus-simulation comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidityReport {
    pub bound: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub pass: bool,
}

impl ValidityReport {
    /// Passes when the estimate is within three standard errors of the bound.
    pub fn new(bound: f64, est: &McEstimate) -> Self {
        ValidityReport {
            bound,
            empirical: est.value,
            std_error: est.std_error,
            pass: est.value <= bound + 3.0 * est.std_error,
        }
    }
}

/// Share of residuals raising an alarm `||P v||^2 > j_th`.
pub fn alarm_rate(p: &DMatrix<f64>, residuals: &[DVector<f64>], j_th: f64) -> Result<McEstimate, VerifyError> {
    if residuals.is_empty() {
        return Err(VerifyError::InvalidDataset("no residuals".into()));
    }
    if let Some(r) = residuals.iter().find(|r| r.len() != p.ncols()) {
        return Err(VerifyError::DimensionMismatch(format!(
            "P has {} columns but a residual has length {}",
            p.ncols(),
            r.len()
        )));
    }
    let hits = residuals.iter().filter(|r| (p * *r).norm_squared() > j_th).count();
    Ok(McEstimate::from_count(hits, residuals.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFdr {
    pub far: McEstimate,
    pub fdr: McEstimate,
}

/// FAR on the healthy (label 0) and FDR on the faulty (label 1) samples.
pub fn evaluate_far_fdr(p: &DMatrix<f64>, data: &LabeledData, j_th: f64) -> Result<FarFdr, VerifyError> {
    if data.residuals.len() != data.labels.len() {
        return Err(VerifyError::InvalidDataset("residuals and labels differ in length".into()));
    }
    let split = |label: u8| -> Vec<DVector<f64>> {
        data.residuals
            .iter()
            .zip(&data.labels)
            .filter(|(_, l)| **l == label)
            .map(|(r, _)| r.clone())
            .collect()
    };
    let (healthy, faulty) = (split(0), split(1));
    if healthy.is_empty() || faulty.is_empty() {
        return Err(VerifyError::InvalidDataset(format!(
            "need both classes, got {} healthy and {} faulty samples",
            healthy.len(),
            faulty.len()
        )));
    }
    Ok(FarFdr {
        far: alarm_rate(p, &healthy, j_th)?,
        fdr: alarm_rate(p, &faulty, j_th)?,
    })
}

/// Chi-square threshold of the unscaled GLRT statistic at level `eps`.
pub fn glrt_chi2_threshold(m_f: usize, eps: f64) -> Result<f64, VerifyError> {
    if m_f == 0 || !(eps > 0.0 && eps < 1.0) {
        return Err(VerifyError::InvalidDataset(format!(
            "need m_f >= 1 and eps in (0, 1), got {m_f}, {eps}"
        )));
    }
    let chi = ChiSquared::new(m_f as f64).map_err(|e| VerifyError::InvalidDataset(e.to_string()))?;
    Ok(chi.inverse_cdf(1.0 - eps))
}

/// Finite discrete law used as an exact witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteLaw {
    pub points: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DiscreteLaw {
    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.points.iter().zip(&self.probs).map(|(x, p)| x * x * p).sum()
    }

    /// Exact `P{m x^2 > 1}`.
    pub fn tail(&self, m: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .filter(|(x, _)| m * *x * *x > 1.0)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Zero-mean law with second moment `variance` whose tail beyond
/// `m x^2 > 1` equals `variance * m / (1 + delta)^2`: mass at zero and at
/// `+-(1 + delta) / sqrt(m)`. Requires `variance * m <= (1 + delta)^2`.
pub fn chebyshev_witness(m: f64, variance: f64, delta: f64) -> Result<DiscreteLaw, VerifyError> {
    if !(m > 0.0) || !(variance >= 0.0) || !(delta > 0.0) {
        return Err(VerifyError::InvalidMixture(format!(
            "need m > 0, variance >= 0, delta > 0; got {m}, {variance}, {delta}"
        )));
    }
    let a = (1.0 + delta) / m.sqrt();
    let p = variance / (a * a);
    if p > 1.0 {
        return Err(VerifyError::InvalidMixture(format!(
            "variance {variance} exceeds the atom radius squared {}",
            a * a
        )));
    }
    Ok(DiscreteLaw {
        points: vec![-a, 0.0, a],
        probs: vec![p / 2.0, 1.0 - p, p / 2.0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn radial_scale_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| radial_scale(Alpha::Finite(1.0), &mut rng)).sum::<f64>() / n as f64;
        // Var(U) = 1/12.
        assert!((mean - 0.5).abs() < 3.0 * (1.0 / 12.0 / n as f64).sqrt());
        let w = DVector::from_vec(vec![1.0, -2.0]);
        let x = sample_radial(&w, Alpha::Finite(1e6), &mut rng);
        assert_relative_eq!(x, w, epsilon = 1e-4);
    }

    #[test]
    fn scalar_calibration_is_exact() {
        let target = SymMatrix::from_diagonal(&[1.3]);
        let m = calibrated_mixture(&target, Alpha::Finite(2.0), 2, 5).unwrap();
        let a = (2.0 * 1.3_f64).sqrt();
        assert_relative_eq!(m.atoms[0][0].abs(), a, epsilon = 1e-12);
        assert_relative_eq!(m.atoms[1][0], -m.atoms[0][0], epsilon = 0.0);
        assert_relative_eq!(m.second_moment().matrix()[(0, 0)], 1.3, epsilon = 1e-12);
    }

    #[test]
    fn zero_target_is_dirac() {
        let m = calibrated_mixture(&SymMatrix::zeros(3), Alpha::Finite(3.0), 6, 1).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0], DVector::zeros(3));
        let region = EllipsoidRegion::new(SymMatrix::identity(3)).unwrap();
        assert_eq!(monte_carlo_tail(&m, &region, 0.0, 20_000, 1).unwrap().value, 0.0);
    }

    #[test]
    fn zero_region_never_alarms() {
        let target = SymMatrix::identity(2);
        let m = calibrated_mixture(&target, Alpha::Finite(2.0), 8, 3).unwrap();
        let region = EllipsoidRegion::new(SymMatrix::zeros(2)).unwrap();
        let e = monte_carlo_tail(&m, &region, 1.0, 10_000, 2).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn calibration_rejects_bad_input() {
        let t = SymMatrix::identity(3);
        assert!(matches!(
            calibrated_mixture(&t, Alpha::Finite(1.0), 4, 0),
            Err(VerifyError::CalibrationFailed(_))
        ));
        assert!(matches!(
            calibrated_mixture(&SymMatrix::from_diagonal(&[1.0, -1.0]), Alpha::Finite(1.0), 4, 0),
            Err(VerifyError::CalibrationFailed(_))
        ));
    }

    #[test]
    fn witness_attains_chebyshev() {
        let law = chebyshev_witness(0.25, 0.5, 1e-12).unwrap();
        assert!(law.mean().abs() < 1e-15);
        assert_relative_eq!(law.second_moment(), 0.5, epsilon = 1e-12);
        assert!((law.tail(0.25) - 0.125).abs() <= 1e-9);
    }

    #[test]
    fn glrt_threshold_matches_chi2() {
        // 1 degree of freedom at 5%: 1.959964^2.
        assert_relative_eq!(glrt_chi2_threshold(1, 0.05).unwrap(), 3.841458820694124, epsilon = 1e-8);
        // 2 degrees of freedom: -2 ln(eps).
        assert_relative_eq!(glrt_chi2_threshold(2, 0.01).unwrap(), -2.0 * 0.01_f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn far_fdr_trivial_cases() {
        let data = LabeledData {
            residuals: vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0])],
            labels: vec![0, 1],
        };
        let zero = DMatrix::zeros(1, 1);
        let r = evaluate_far_fdr(&zero, &data, 0.5).unwrap();
        assert_eq!((r.far.value, r.fdr.value), (0.0, 0.0));
        let r = evaluate_far_fdr(&DMatrix::identity(1, 1), &data, 0.0).unwrap();
        assert_eq!((r.far.value, r.fdr.value), (1.0, 1.0));
        let healthy_only = LabeledData {
            residuals: vec![DVector::from_vec(vec![1.0])],
            labels: vec![0],
        };
        assert!(matches!(
            evaluate_far_fdr(&zero, &healthy_only, 0.5),
            Err(VerifyError::InvalidDataset(_))
        ));
    }

    #[test]
    fn fit_to_support_shrinks_into_box() {
        let target = SymMatrix::identity(2).scale(4.0);
        let m = calibrated_mixture(&target, Alpha::Finite(2.0), 10, 9).unwrap();
        let b = SupportSet::centered_box(&[1.0, 1.0]).unwrap();
        let fitted = m.fit_to_support(&b);
        assert!(fitted.within(&b, 1e-12));
        assert!(fitted.second_moment().trace() <= m.second_moment().trace());
    }
}
