//! Randomized invariants of the bounds, designs, thresholds and residual
//! generators.

use drfd::ambiguity::SupportSet;
use drfd::bounds::{self, EllipsoidRegion};
use drfd::design::{self, Metric};
use drfd::sysmodel::{self, LtiSystem};
use drfd::verify;
use drfd::{Alpha, AmbiguitySet, SymMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let g = gauss(rng, n, n);
    SymMatrix::symmetrized(&g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2)
}

/// Random PSD `M` of random rank, scaled so `gamma2 Tr(M S0) = t`.
fn region_with_trace(rng: &mut ChaCha8Rng, amb: &AmbiguitySet, t: f64) -> EllipsoidRegion {
    let n = amb.dim();
    let k = rng.random_range(1..=n);
    let g = gauss(rng, n, k);
    let m = SymMatrix::symmetrized(&g * g.transpose());
    let raw = bounds::scaled_trace(&EllipsoidRegion::new(m.clone()).unwrap(), amb);
    EllipsoidRegion::new(m.scale(t / raw)).unwrap()
}

fn instance(seed: u64, n: usize, alpha: f64) -> (ChaCha8Rng, AmbiguitySet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s0 = spd(&mut rng, n);
    let gamma2 = 1.0 + rng.random::<f64>();
    let amb = AmbiguitySet::moments(s0, gamma2, Alpha::Finite(alpha)).unwrap();
    (rng, amb)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_never_exceeds_chebyshev(seed in any::<u64>(), n in 1usize..8, alpha in 0.5f64..100.0, t in 0.001f64..3.0) {
        let (mut rng, amb) = instance(seed, n, alpha);
        let region = region_with_trace(&mut rng, &amb, t);
        let g = bounds::gauss_bound(&region, &amb).unwrap().value;
        let c = bounds::chebyshev_bound(&region, &amb).unwrap().value;
        prop_assert!(g <= c);
        if c < 1.0 {
            prop_assert!(g < c);
        }
    }

    #[test]
    fn gauss_bound_grows_with_alpha(seed in any::<u64>(), n in 1usize..6, a in 0.5f64..50.0, k in 1.0f64..4.0, t in 0.001f64..3.0) {
        let (mut rng, amb) = instance(seed, n, a);
        let region = region_with_trace(&mut rng, &amb, t);
        let lo = bounds::gauss_bound(&region, &amb).unwrap().value;
        let hi = bounds::gauss_bound(&region, &amb.with_alpha(Alpha::Finite(a * k)).unwrap()).unwrap().value;
        prop_assert!(lo <= hi + 1e-15);
    }

    #[test]
    fn bound_depends_on_m_and_s0_through_their_product(seed in any::<u64>(), n in 1usize..6, alpha in 0.5f64..30.0, s in 0.1f64..10.0, t in 0.001f64..3.0) {
        let (mut rng, amb) = instance(seed, n, alpha);
        let region = region_with_trace(&mut rng, &amb, t);
        let a = bounds::gauss_bound(&region.scaled(s), &amb).unwrap().value;
        let scaled = AmbiguitySet::moments(amb.s0().scale(s), amb.gamma2(), amb.alpha()).unwrap();
        let b = bounds::gauss_bound(&region, &scaled).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_designs_are_feasible(seed in any::<u64>(), nd in 1usize..5, nr in 1usize..5, alpha in 0.5f64..30.0, eps in 0.005f64..0.5) {
        let (mut rng, amb) = instance(seed, nd, alpha);
        let w = gauss(&mut rng, nr, nd);
        prop_assume!(linalg_rank(&w) == nr);
        let v = gauss(&mut rng, nr, 2);
        for metric in [Metric::Frobenius, Metric::PseudoDet] {
            let r = design::closed_form_design(metric, &w, &v, &amb, eps).unwrap();
            let far = design::worst_case_far(&r.p, &w, &amb, None).unwrap().value;
            prop_assert!(far <= eps * (1.0 + 1e-9), "{metric:?}: {far} > {eps}");
        }
    }

    #[test]
    fn unbounded_threshold_scales_with_the_statistic(seed in any::<u64>(), n in 1usize..6, alpha in 0.5f64..30.0, s in 0.1f64..10.0, eps in 0.005f64..0.9) {
        let (mut rng, amb) = instance(seed, n, alpha);
        let region = region_with_trace(&mut rng, &amb, 1.0);
        let j1 = design::safe_threshold(&region, &amb, eps, None).unwrap();
        let j2 = design::safe_threshold(&region.scaled(s), &amb, eps, None).unwrap();
        prop_assert!((j2.j_th - s * j1.j_th).abs() <= 1e-12 * j2.j_th);
        prop_assert!(j1.far_bound.value <= eps * (1.0 + 1e-12));
    }
}

fn linalg_rank(m: &DMatrix<f64>) -> usize {
    drfd::linalg::rank(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn support_never_loosens_the_bound(seed in any::<u64>(), n in 1usize..4, alpha in 0.5f64..20.0, t in 0.05f64..1.5, width in 0.5f64..4.0) {
        let (mut rng, amb) = instance(seed, n, alpha);
        let region = region_with_trace(&mut rng, &amb, t);
        let half: Vec<f64> = (0..n).map(|i| width * amb.s0().matrix()[(i, i)].sqrt()).collect();
        let boxed = amb.with_support(SupportSet::centered_box(&half).unwrap()).unwrap();
        let b = bounds::bounded_gauss_bound(&region, &boxed, None).unwrap().value;
        let g = bounds::gauss_bound(&region, &amb).unwrap().value;
        prop_assert!(b <= g + 1e-6, "{b} > {g}");
    }

    #[test]
    fn calibrated_mixtures_respect_the_gauss_bound(seed in any::<u64>(), n in 1usize..4, alpha in 0.5f64..20.0, t in 0.05f64..1.5) {
        let (mut rng, amb) = instance(seed, n, alpha);
        let region = region_with_trace(&mut rng, &amb, t);
        let mix = verify::calibrated_mixture(&amb.s0().scale(amb.gamma2()), amb.alpha(), 2 * n + 4, seed ^ 1).unwrap();
        let est = verify::monte_carlo_tail(&mix, &region, 1.0, 20_000, seed ^ 2).unwrap();
        let g = bounds::gauss_bound(&region, &amb).unwrap().value;
        prop_assert!(est.value <= g + 3.0 * est.std_error + 1e-12, "{} > {g}", est.value);
    }
}

/// Random observable plant with `n_x <= 3`.
fn random_system(rng: &mut ChaCha8Rng) -> LtiSystem {
    let n_x = rng.random_range(1..=3);
    let n_y = rng.random_range(1..=2);
    let n_u = rng.random_range(0..=1);
    let n_d = rng.random_range(1..=2);
    let a = gauss(rng, n_x, n_x) * 0.4;
    LtiSystem::new(
        a,
        gauss(rng, n_x, n_u),
        gauss(rng, n_x, n_d),
        gauss(rng, n_x, 1),
        gauss(rng, n_y, n_x),
        gauss(rng, n_y, n_u),
        gauss(rng, n_y, n_d),
        gauss(rng, n_y, 1),
        1.0,
    )
    .unwrap()
}

fn stack(m: &DMatrix<f64>, start: usize, len: usize) -> DVector<f64> {
    let r = m.nrows();
    DVector::from_fn(r * len, |i, _| m[(i % r, start + i / r)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parity_residuals_remove_the_state(seed in any::<u64>(), extra in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(&mut rng);
        prop_assume!(sys.observability_rank() == sys.n_x());
        let s = sys.n_x() + extra;
        let model = match sysmodel::parity_residual_model(&sys, s) {
            Ok(m) => m,
            Err(sysmodel::SysModelError::NoParityVectors) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let gamma = sys.extended_observability(s);
        let scale = gamma.amax().max(1.0);
        prop_assert!((&model.parity * &gamma).amax() <= 1e-9 * scale);
        let pp = &model.parity * model.parity.transpose();
        prop_assert!((pp - DMatrix::identity(model.n_r(), model.n_r())).amax() <= 1e-10);

        let horizon = s + 12;
        let u = gauss(&mut rng, sys.n_u(), horizon);
        let d = gauss(&mut rng, sys.n_d(), horizon);
        let f = gauss(&mut rng, sys.n_f(), horizon);
        let x0 = DVector::from_fn(sys.n_x(), |_, _| StandardNormal.sample(&mut rng));
        let y = sysmodel::simulate_lti(&sys, &u, &d, &f, horizon, Some(&x0)).unwrap();
        for k in s..horizon {
            let r = model.residual_at(&y, &u, k);
            let expect = &model.w * stack(&d, k - s, s + 1) + &model.v * stack(&f, k - s, s + 1);
            let tol = 1e-9 * (1.0 + y.amax());
            prop_assert!((r - expect).amax() <= tol);
        }
    }
}
