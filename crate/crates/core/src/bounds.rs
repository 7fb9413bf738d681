//! Worst-case probability that a disturbance leaves an ellipsoid.
//!
//! For the acceptance region `E = {xi : xi^T M xi <= 1}` these functions
//! bound `sup_P P{xi not in E}` over an [`AmbiguitySet`]:
//!
//! * [`chebyshev_bound`]: moments only, `min{gamma2 Tr(M S0), 1}` (exact).
//! * [`gauss_bound`]: moments plus alpha-unimodality, two-branch closed form.
//! * [`gauss_bound_tau`]: the same bound for a fixed linearization point
//!   `tau0`; minimizing it over `tau0` recovers [`gauss_bound`].
//! * [`bounded_gauss_bound`]: moments, unimodality and an ellipsoidal support,
//!   through an SDP. With infinite alpha it is the plain support S-procedure.
//!
//! All values are clamped to `[0, 1]`. Internally SDPs are posed in whitened
//! coordinates `xi = S0^{1/2} z`, which leaves the bound unchanged.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::{Alpha, AmbiguitySet, SupportSet};
use crate::conic::{self, ConicError, Kkt, LinExpr, Lmi, SdpProblem, SdpSolution, SdpStatus};
use crate::linalg::{self, LinalgError, SymMatrix};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("alpha must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("this bound needs a finite alpha")]
    FiniteAlphaRequired,
    #[error("tau0 must be >= 1, got {0}")]
    InvalidTau0(f64),
    #[error("second branch selected with (alpha+1) tau0^-alpha - 1 = {0:e} <= 0")]
    InvalidBranch(f64),
    #[error("region is {region}x{region} but the ambiguity set has dimension {amb}")]
    DimensionMismatch { region: usize, amb: usize },
    #[error("solver finished with status {status:?} (kkt {kkt:?})")]
    SolverError { status: SdpStatus, kkt: Kkt },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Acceptance region `{xi : xi^T M xi <= 1}`. `M = 0` is all of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidRegion {
    #[serde(rename = "M")]
    m: SymMatrix,
}

impl EllipsoidRegion {
    pub fn new(m: SymMatrix) -> Result<Self, BoundsError> {
        if !m.is_psd(1e-10) {
            return Err(LinalgError::NotPsd {
                min_eig: m.min_eigenvalue(),
            }
            .into());
        }
        Ok(EllipsoidRegion { m })
    }

    pub fn m(&self) -> &SymMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// Region of the statistic `xi^T M xi / j_th <= 1`.
    pub fn scaled(&self, s: f64) -> EllipsoidRegion {
        EllipsoidRegion { m: self.m.scale(s) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    SmallDeviation,
    LargeDeviation,
    Saturated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub branch: Branch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0_used: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<SdpSolution>,
}

impl BoundResult {
    fn closed(value: f64, branch: Branch) -> Self {
        let value = value.clamp(0.0, 1.0);
        let branch = if value >= 1.0 { Branch::Saturated } else { branch };
        BoundResult {
            value,
            branch,
            tau0_used: None,
            certificate: None,
        }
    }
}

fn check_alpha(alpha: Alpha) -> Result<(), BoundsError> {
    match alpha {
        Alpha::Finite(a) if !(a > 0.0) || !a.is_finite() => Err(BoundsError::InvalidAlpha(a)),
        _ => Ok(()),
    }
}

fn check_dims(region: &EllipsoidRegion, amb: &AmbiguitySet) -> Result<(), BoundsError> {
    if region.dim() != amb.dim() {
        return Err(BoundsError::DimensionMismatch {
            region: region.dim(),
            amb: amb.dim(),
        });
    }
    Ok(())
}

/// `c_alpha = (2 / (alpha + 2))^{2 / alpha}`; 1 for infinite alpha.
pub fn improvement_factor(alpha: Alpha) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    Ok(match alpha {
        Alpha::Finite(a) => (-(2.0 / a) * (a / 2.0).ln_1p()).exp(),
        Alpha::Infinite => 1.0,
    })
}

/// `gamma2 Tr(M S0)`.
pub fn scaled_trace(region: &EllipsoidRegion, amb: &AmbiguitySet) -> f64 {
    (amb.gamma2() * region.m.trace_product(amb.s0())).max(0.0)
}

/// `min{gamma2 Tr(M S0), 1}`. Exact over moment-only sets with unbounded
/// support, and a valid (looser) bound under any support restriction.
pub fn chebyshev_bound(region: &EllipsoidRegion, amb: &AmbiguitySet) -> Result<BoundResult, BoundsError> {
    check_dims(region, amb)?;
    Ok(BoundResult::closed(scaled_trace(region, amb), Branch::SmallDeviation))
}

/// Closed-form alpha-unimodal Gauss bound under unbounded support. For
/// infinite alpha this is [`chebyshev_bound`].
pub fn gauss_bound(region: &EllipsoidRegion, amb: &AmbiguitySet) -> Result<BoundResult, BoundsError> {
    check_dims(region, amb)?;
    let a = match amb.alpha() {
        Alpha::Infinite => return chebyshev_bound(region, amb),
        Alpha::Finite(a) => a,
    };
    let t = scaled_trace(region, amb);
    Ok(BoundResult::closed(gauss_value(t, a), gauss_branch(t, a)))
}

fn gauss_branch(t: f64, a: f64) -> Branch {
    let c = (-(2.0 / a) * (a / 2.0).ln_1p()).exp();
    if c * t <= a / (a + 2.0) {
        Branch::SmallDeviation
    } else {
        Branch::LargeDeviation
    }
}

/// Gauss bound as a function of `t = gamma2 Tr(M S0)`.
pub(crate) fn gauss_value(t: f64, a: f64) -> f64 {
    let c = (-(2.0 / a) * (a / 2.0).ln_1p()).exp();
    if c * t <= a / (a + 2.0) {
        c * t
    } else {
        // 1 - (t (a+2)/a)^{-a/2}
        let ta = t * (a + 2.0) / a;
        -(-(a / 2.0) * ta.ln()).exp_m1()
    }
}

/// Linearized bound at a fixed `tau0 >= 1`:
/// `f1 = a tau^{-a-1} sqrt(T) - (a+1) tau^{-a} + 1` when
/// `(a+1) tau^{-a} <= 1 + (a/2) tau^{-a-1} sqrt(T)`, otherwise
/// `f2 = a^2 tau^{-2a-2} T / (4 [(a+1) tau^{-a} - 1])`, with
/// `T = gamma2 Tr(M S0^alpha)`.
pub fn gauss_bound_tau(region: &EllipsoidRegion, amb: &AmbiguitySet, tau0: f64) -> Result<BoundResult, BoundsError> {
    check_dims(region, amb)?;
    let a = amb.alpha().finite().ok_or(BoundsError::FiniteAlphaRequired)?;
    if !(tau0 >= 1.0) || !tau0.is_finite() {
        return Err(BoundsError::InvalidTau0(tau0));
    }
    let big_t = scaled_trace(region, amb) * (a + 2.0) / a;
    let (value, branch) = tau_value(big_t, a, tau0)?;
    let mut r = BoundResult::closed(value, branch);
    r.tau0_used = Some(tau0);
    Ok(r)
}

fn tau_value(big_t: f64, a: f64, tau0: f64) -> Result<(f64, Branch), BoundsError> {
    let ln_tau = tau0.ln();
    let p = (-a * ln_tau).exp(); // tau^{-a}
    let p1 = p / tau0; // tau^{-a-1}
    let root = big_t.sqrt();
    if (a + 1.0) * p <= 1.0 + 0.5 * a * p1 * root {
        Ok((a * p1 * root - (a + 1.0) * p + 1.0, Branch::LargeDeviation))
    } else {
        let denom = (a + 1.0) * p - 1.0;
        if denom <= 0.0 {
            return Err(BoundsError::InvalidBranch(denom));
        }
        Ok((a * a * p1 * p1 * big_t / (4.0 * denom), Branch::SmallDeviation))
    }
}

/// `alpha`-unimodal Gauss bound for the hypercube event
/// `max_i |xi_i| >= kappa sigma` of an `n`-dimensional vector with isotropic
/// covariance `sigma^2 / n I`.
pub fn hypercube_gauss_bound(kappa: f64, alpha: Alpha, n: usize) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    if n == 0 || !(kappa > 0.0) {
        return Err(BoundsError::InvalidAlpha(kappa));
    }
    let a = match alpha {
        Alpha::Infinite => return Ok((1.0 / (kappa * kappa)).min(1.0)),
        Alpha::Finite(a) => a,
    };
    let c = improvement_factor(alpha)?;
    if kappa > (c * (a + 2.0) / a).sqrt() {
        Ok(c / (kappa * kappa))
    } else {
        Ok(1.0 - ((a / 2.0) * (a / (a + 2.0)).ln() + a * kappa.ln()).exp())
    }
}

/// `max{1/sqrt(c_alpha), sqrt(gamma2 Tr(M S0^alpha))}`.
pub fn default_tau0(region: &EllipsoidRegion, amb: &AmbiguitySet) -> Result<f64, BoundsError> {
    check_dims(region, amb)?;
    let c = improvement_factor(amb.alpha())?;
    let big_t = scaled_trace(region, amb) * amb.alpha().moment_inflation();
    Ok((1.0 / c.sqrt()).max(big_t.sqrt()))
}

/// Whitened view of an ambiguity set: `xi = R z` with `R = S0^{1/2}`, so `z`
/// has second moment at most `gamma2 I`. Support constraints are lifted to
/// `(n+1)`-square matrices `Phi_j` whose quadratic form in `(z, 1)` is
/// nonpositive inside the support, each normalized to unit max entry.
pub(crate) struct Whitened {
    pub root: DMatrix<f64>,
    pub phis: Vec<DMatrix<f64>>,
}

impl Whitened {
    pub fn new(amb: &AmbiguitySet) -> Result<Self, BoundsError> {
        let (root, inv_root) = linalg::psd_sqrt_inv(amb.s0())?;
        let root = root.into_matrix();
        let inv_root = inv_root.into_matrix();
        let support: SupportSet = amb.support().transformed(&root, &inv_root);
        let phis = support
            .ellipsoids
            .iter()
            .map(|e| {
                let l = e.lifted();
                let s = l.amax();
                if s > 0.0 {
                    l / s
                } else {
                    l
                }
            })
            .collect();
        Ok(Whitened { root, phis })
    }

    pub fn n(&self) -> usize {
        self.root.nrows()
    }

    /// `R M R` for a region given in the original coordinates.
    pub fn region(&self, m: &SymMatrix) -> DMatrix<f64> {
        m.congruence(&self.root).into_matrix()
    }
}

/// Variables shared by the support-constrained bound and design programs.
pub(crate) struct SupportVars {
    pub q_mat: conic::Var,
    pub q_vec: conic::Var,
    pub q0: conic::Var,
    pub beta: Option<conic::Var>,
}

impl SupportVars {
    /// Declares `Q, q, q0, beta, beta~`, adds `Q ⪰ 0`, the nonnegativity of
    /// the multipliers and the support LMI `[[Q, q], [q^T, q0]] + sum beta~_j Phi_j ⪰ 0`.
    pub fn declare(p: &mut SdpProblem, w: &Whitened) -> Self {
        let n = w.n();
        let ne = w.phis.len();
        let q_mat = p.sym("Q", n);
        let q_vec = p.vector("q", n);
        let q0 = p.scalar("q0");
        let beta = (ne > 0).then(|| p.vector("beta", ne));
        let beta_t = (ne > 0).then(|| p.vector("beta~", ne));
        p.add_lmi(Lmi::new("Q >= 0", n).sym_at(q_mat, 0, 1.0));
        let mut sup = Lmi::new("support", n + 1)
            .sym_at(q_mat, 0, 1.0)
            .vector_at(q_vec, 0, n, 1.0)
            .scalar_entry(q0, n, n, 1.0);
        if let Some(bt) = beta_t {
            for (j, phi) in w.phis.iter().enumerate() {
                sup = sup.scalar_at(bt.entry(j), 0, 0, phi);
            }
        }
        p.add_lmi(sup);
        for v in [beta, beta_t].into_iter().flatten() {
            for j in 0..v.kind().len() {
                p.add_nonneg(v.entry(j));
            }
        }
        SupportVars {
            q_mat,
            q_vec,
            q0,
            beta,
        }
    }

    /// `[[Q, q, 0], [q^T, q0, 0], [0, 0, 0]] + sum beta_j Phi_j` padded to
    /// `dim`.
    pub fn main_lmi(&self, name: &str, w: &Whitened, dim: usize) -> Lmi {
        let n = w.n();
        let mut lmi = Lmi::new(name, dim)
            .sym_at(self.q_mat, 0, 1.0)
            .vector_at(self.q_vec, 0, n, 1.0)
            .scalar_entry(self.q0, n, n, 1.0);
        if let Some(b) = self.beta {
            for (j, phi) in w.phis.iter().enumerate() {
                lmi = lmi.scalar_at(b.entry(j), 0, 0, phi);
            }
        }
        lmi
    }

    /// `gamma2 * inflation * Tr(Q) + q0` in whitened coordinates.
    pub fn objective(&self, n: usize, gamma2: f64, inflation: f64) -> LinExpr {
        LinExpr::new()
            .trace(self.q_mat, &DMatrix::identity(n, n), gamma2 * inflation)
            .scalar(self.q0, 1.0)
    }
}

/// The worst-case probability SDP for a given region. For finite alpha the
/// `t`-row carries the tangent of `-||M^{1/2} xi||^{-alpha}` at `tau0`; for
/// infinite alpha it reduces to the S-procedure over `xi^T M xi >= 1`
/// intersected with the support.
pub fn bound_sdp(region: &EllipsoidRegion, amb: &AmbiguitySet, tau0: Option<f64>) -> Result<(SdpProblem, Option<f64>), BoundsError> {
    check_dims(region, amb)?;
    check_alpha(amb.alpha())?;
    let w = Whitened::new(amb)?;
    let n = w.n();
    let mz = w.region(region.m());
    let mut p = SdpProblem::new();
    let vars = SupportVars::declare(&mut p, &w);
    let eta = p.scalar("eta");
    p.add_nonneg(eta);
    let inflation = amb.alpha().moment_inflation();
    p.minimize(vars.objective(n, amb.gamma2(), inflation));
    let tau = match amb.alpha() {
        Alpha::Finite(a) => {
            let tau0 = match tau0 {
                Some(t) => t,
                None => default_tau0(region, amb)?,
            };
            if !(tau0 > 0.0) || !tau0.is_finite() {
                return Err(BoundsError::InvalidTau0(tau0));
            }
            let p_a = (-a * tau0.ln()).exp();
            let lmi = vars
                .main_lmi("tail", &w, n + 2)
                .scalar_at(eta, 0, 0, &(-&mz))
                .scalar_entry(eta, n + 1, n + 1, 1.0)
                .constant_entry(n, n, -1.0 + (a + 1.0) * p_a)
                .constant_entry(n, n + 1, -a / (2.0 * tau0) * p_a);
            p.add_lmi(lmi);
            Some(tau0)
        }
        Alpha::Infinite => {
            let lmi = vars
                .main_lmi("tail", &w, n + 1)
                .scalar_at(eta, 0, 0, &(-&mz))
                .scalar_entry(eta, n, n, 1.0)
                .constant_entry(n, n, -1.0);
            p.add_lmi(lmi);
            None
        }
    };
    Ok((p, tau))
}

/// SDP bound combining moments, unimodality and the ellipsoidal support.
/// `tau0` defaults to [`default_tau0`], which guarantees a value no larger
/// than [`gauss_bound`] up to solver tolerance.
pub fn bounded_gauss_bound(
    region: &EllipsoidRegion,
    amb: &AmbiguitySet,
    tau0: Option<f64>,
) -> Result<BoundResult, BoundsError> {
    let (p, tau) = bound_sdp(region, amb, tau0)?;
    let sol = conic::solve_sdp(&p, conic::DEFAULT_TOL)?;
    if sol.status != SdpStatus::Optimal {
        return Err(BoundsError::SolverError {
            status: sol.status,
            kkt: sol.kkt,
        });
    }
    let t = scaled_trace(region, amb);
    let branch = match amb.alpha() {
        Alpha::Finite(a) => gauss_branch(t, a),
        Alpha::Infinite => Branch::SmallDeviation,
    };
    let mut r = BoundResult::closed(sol.objective, branch);
    r.tau0_used = tau;
    r.certificate = Some(sol);
    Ok(r)
}

/// Support-aware bound when the set has a support, closed form otherwise.
pub fn worst_case_bound(region: &EllipsoidRegion, amb: &AmbiguitySet) -> Result<BoundResult, BoundsError> {
    if amb.support().is_unbounded() {
        gauss_bound(region, amb)
    } else {
        bounded_gauss_bound(region, amb, None)
    }
}

/// Log-spaced grid of `count` points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// The vector `(z, 1)` lifted, for evaluating quadratic forms in tests.
pub fn lift(z: &DVector<f64>) -> DVector<f64> {
    let n = z.len();
    DVector::from_fn(n + 1, |i, _| if i < n { z[i] } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_set(s0: f64, gamma2: f64, alpha: Alpha) -> AmbiguitySet {
        AmbiguitySet::moments(SymMatrix::from_diagonal(&[s0]), gamma2, alpha).unwrap()
    }

    fn region1(m: f64) -> EllipsoidRegion {
        EllipsoidRegion::new(SymMatrix::from_diagonal(&[m])).unwrap()
    }

    #[test]
    fn improvement_factor_values() {
        assert_relative_eq!(improvement_factor(Alpha::Finite(1.0)).unwrap(), 4.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(improvement_factor(Alpha::Finite(2.0)).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(improvement_factor(Alpha::Infinite).unwrap(), 1.0);
        assert!(matches!(improvement_factor(Alpha::Finite(0.0)), Err(BoundsError::InvalidAlpha(_))));
        assert!(matches!(improvement_factor(Alpha::Finite(-1.0)), Err(BoundsError::InvalidAlpha(_))));
    }

    #[test]
    fn chebyshev_examples() {
        let amb = scalar_set(1.0, 1.0, Alpha::Infinite);
        assert_relative_eq!(chebyshev_bound(&region1(0.25), &amb).unwrap().value, 0.25);
        assert_eq!(chebyshev_bound(&region1(0.0), &amb).unwrap().value, 0.0);
        let r = chebyshev_bound(&region1(5.0), &amb).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.branch, Branch::Saturated);
    }

    #[test]
    fn gauss_examples() {
        let amb = scalar_set(1.0, 1.0, Alpha::Finite(1.0));
        let r = gauss_bound(&region1(0.25), &amb).unwrap();
        assert_relative_eq!(r.value, 1.0 / 9.0, epsilon = 1e-15);
        assert_eq!(r.branch, Branch::SmallDeviation);
        let r = gauss_bound(&region1(1.0), &amb).unwrap();
        assert_relative_eq!(r.value, 1.0 - 1.0 / 3.0_f64.sqrt(), epsilon = 1e-15);
        assert_eq!(r.branch, Branch::LargeDeviation);

        let big = scalar_set(1.0, 1.0, Alpha::Finite(1e8));
        let cheb = scalar_set(1.0, 1.0, Alpha::Infinite);
        for m in [0.1, 0.25, 0.7, 2.0] {
            let g = gauss_bound(&region1(m), &big).unwrap().value;
            let c = chebyshev_bound(&region1(m), &cheb).unwrap().value;
            assert!((g - c).abs() < 1e-6, "m={m}: {g} vs {c}");
        }
    }

    #[test]
    fn tau_relaxation_examples() {
        let a = 1.0;
        let amb = scalar_set(1.0, 1.0, Alpha::Finite(a));
        let c: f64 = 4.0 / 9.0;
        // Small-deviation regime at tau0 = 1/sqrt(c).
        let r = gauss_bound_tau(&region1(0.25), &amb, 1.0 / c.sqrt()).unwrap();
        assert_relative_eq!(r.value, c * 0.25, epsilon = 1e-14);
        // Large-deviation regime at tau0 = sqrt(T).
        let big_t: f64 = 3.0 * 1.0;
        let r = gauss_bound_tau(&region1(1.0), &amb, big_t.sqrt()).unwrap();
        assert_relative_eq!(r.value, 1.0 - big_t.powf(-0.5), epsilon = 1e-14);
        assert!(matches!(gauss_bound_tau(&region1(1.0), &amb, 0.5), Err(BoundsError::InvalidTau0(_))));
    }

    #[test]
    fn hypercube_examples() {
        let a = Alpha::Finite(1.0);
        assert_relative_eq!(hypercube_gauss_bound(2.0, a, 1).unwrap(), 1.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(hypercube_gauss_bound(1.0, a, 1).unwrap(), 1.0 - 1.0 / 3.0_f64.sqrt(), epsilon = 1e-15);
        assert_eq!(hypercube_gauss_bound(2.0, Alpha::Infinite, 3).unwrap(), 0.25);
        assert_eq!(hypercube_gauss_bound(0.5, Alpha::Infinite, 3).unwrap(), 1.0);
    }

    #[test]
    fn default_tau0_examples() {
        // gamma2 Tr(M S0^alpha) = 1 with alpha = 1: M S0 = 1/3.
        let amb = scalar_set(1.0, 1.0, Alpha::Finite(1.0));
        assert_relative_eq!(default_tau0(&region1(1.0 / 3.0), &amb).unwrap(), 1.5, epsilon = 1e-14);
        assert_relative_eq!(default_tau0(&region1(3.0), &amb).unwrap(), 3.0, epsilon = 1e-14);
        let inf = scalar_set(1.0, 1.0, Alpha::Infinite);
        assert_relative_eq!(default_tau0(&region1(4.0), &inf).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(default_tau0(&region1(0.25), &inf).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sdp_without_support_matches_tau_relaxation() {
        for (m, a, tau) in [(0.25, 1.0, 1.5_f64), (1.0, 1.0, 3.0_f64.sqrt()), (0.1, 3.0, 2.0), (0.5, 9.0, 1.2)] {
            let amb = scalar_set(1.0, 1.0, Alpha::Finite(a));
            let sdp = bounded_gauss_bound(&region1(m), &amb, Some(tau)).unwrap();
            let closed = gauss_bound_tau(&region1(m), &amb, tau).unwrap();
            assert!((sdp.value - closed.value).abs() < 1e-6, "m={m} a={a} tau={tau}: {} vs {}", sdp.value, closed.value);
        }
    }

    #[test]
    fn sdp_without_support_at_infinite_alpha_is_chebyshev() {
        let amb = scalar_set(2.0, 1.5, Alpha::Infinite);
        for m in [0.05, 0.2, 1.0] {
            let sdp = bounded_gauss_bound(&region1(m), &amb, None).unwrap();
            let c = chebyshev_bound(&region1(m), &amb).unwrap();
            assert!((sdp.value - c.value).abs() < 1e-6, "{} vs {}", sdp.value, c.value);
        }
    }

    #[test]
    fn large_ball_support_is_dominated() {
        let amb = scalar_set(1.0, 1.0, Alpha::Finite(1.0))
            .with_support(SupportSet::ball(1, 1e3))
            .unwrap();
        let r = bounded_gauss_bound(&region1(0.25), &amb, None).unwrap();
        assert!(r.value <= 1.0 / 9.0 + 1e-6, "{}", r.value);
    }

    #[test]
    fn support_inside_region_gives_zero() {
        let amb = AmbiguitySet::moments(SymMatrix::identity(2), 1.0, Alpha::Finite(2.0))
            .unwrap()
            .with_support(SupportSet::ball(2, 0.5))
            .unwrap();
        let region = EllipsoidRegion::new(SymMatrix::identity(2)).unwrap();
        // The tangent at tau0 = 1 vanishes on the unit ball.
        let r = bounded_gauss_bound(&region, &amb, Some(1.0)).unwrap();
        assert!(r.value <= 1e-6, "{}", r.value);
        // At the default tau0 = 2 the tangent 1 - 3/4 + t/4 is still positive
        // at the support radius t = 1/2, and the constant 3/8 is optimal.
        let r = bounded_gauss_bound(&region, &amb, None).unwrap();
        assert_eq!(r.tau0_used, Some(2.0));
        assert_relative_eq!(r.value, 0.375, epsilon = 1e-7);
        let inf = amb.with_alpha(Alpha::Infinite).unwrap();
        let r = bounded_gauss_bound(&region, &inf, None).unwrap();
        assert!(r.value <= 1e-6, "{}", r.value);
    }
}
