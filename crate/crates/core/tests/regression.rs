//! Frozen objective values on the default three-tank benchmark. These pin the
//! current implementation; a change here means the benchmark, the fit or the
//! designs moved.

use drfd::ambiguity::{self, FitOptions};
use drfd::design::{self, DesignOptions, Metric, Scheme};
use drfd::sysmodel::{self, BenchmarkConfig};
use drfd::Alpha;
use nalgebra::DMatrix;

#[test]
fn default_benchmark_objectives() {
    let bench = sysmodel::three_tank_benchmark(&BenchmarkConfig::default()).unwrap();
    let n_r = bench.model.n_r();
    assert_eq!(n_r, 11);
    let amb = ambiguity::fit_ambiguity(&bench.train.residuals, Alpha::Finite(n_r as f64), &FitOptions::default()).unwrap();
    let w = DMatrix::identity(n_r, n_r);
    let frozen = [
        (Metric::Frobenius, 0.05, [6.8524, 9.6305, 6.8524, 9.6305]),
        (Metric::Frobenius, 0.01, [1.3705, 1.9261, 1.9590, 2.0960]),
        (Metric::PseudoDet, 0.02, [-12.0488, -10.3471, -11.9242, -10.3277]),
    ];
    for (metric, eps, expect) in frozen {
        for (scheme, e) in Scheme::ALL.into_iter().zip(expect) {
            let r = design::design(scheme, metric, &w, &bench.model.v, &amb, eps, &DesignOptions::default()).unwrap();
            assert!((r.objective - e).abs() <= 1e-4, "{scheme} {metric:?} eps {eps}: {} vs {e}", r.objective);
        }
    }
}
