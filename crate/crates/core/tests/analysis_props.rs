mod common;

use adiabat::analysis::*;
use common::log_grid;
use proptest::prelude::*;

/// Power law below `crossover`, matched continuously to an exponential above.
fn piecewise_curve(eps: &[f64], crossover: f64, slope: f64, rate: f64) -> Vec<(f64, f64)> {
    let at_cross = crossover.powf(slope);
    eps.iter()
        .map(|&e| {
            let d = if e <= crossover {
                e.powf(slope)
            } else {
                at_cross * (-rate / e + rate / crossover).exp()
            };
            (e, d)
        })
        .collect()
}

#[test]
fn recovers_synthetic_crossover() {
    let eps = log_grid(1e-4, 1e-1, 16);
    for (k, slope, rate) in [(7usize, 2.0, 0.02), (9, 3.0, 0.05), (5, 0.5, 0.01)] {
        let cross = eps[k];
        let pts = piecewise_curve(&eps, cross, slope, rate);
        let split = split_regimes(&pts).unwrap();
        assert!(!split.degenerate);
        let found = eps.iter().position(|&e| e == split.crossover).unwrap();
        assert!(found.abs_diff(k) <= 1, "crossover at index {found}, expected {k}");
        assert!((split.polynomial_fit.exponent_or_rate - slope).abs() < 0.05);
        let exp_fit = split.exponential_fit.unwrap();
        assert!((exp_fit.exponent_or_rate - rate).abs() < 0.1 * rate);
    }
}

#[test]
fn floor_points_are_ignored() {
    let eps = log_grid(1e-3, 1e-1, 10);
    let mut pts: Vec<(f64, f64)> = eps.iter().map(|&e| (e, e * e)).collect();
    pts.push((1e-4, 1e-13));
    pts.push((2e-4, 0.0));
    let fit = fit_power_law(&pts).unwrap();
    assert_eq!(fit.points, 10);
    assert!((fit.exponent_or_rate - 2.0).abs() < 1e-10);
}

#[test]
fn report_serializes() {
    let eps = log_grid(1e-3, 1e-1, 10);
    let pts: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 2.0 * e)).collect();
    let fit = fit_power_law(&pts).unwrap();
    let json = serde_json::to_string(&fit).unwrap();
    assert!(json.contains("\"regime\":\"polynomial\""));
    let back: ScalingFit = serde_json::from_str(&json).unwrap();
    assert_eq!(back, fit);
}

proptest! {
    #[test]
    fn power_law_fit_is_exact(p in 0.2f64..5.0, a in 1e-3f64..1e3, lo in 1e-5f64..1e-2, n in 4usize..20) {
        let pts: Vec<(f64, f64)> = log_grid(lo, lo * 50.0, n).into_iter().map(|e| (e, a * e.powf(p))).collect();
        prop_assume!(pts.iter().all(|(_, d)| *d >= INFIDELITY_FLOOR));
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.exponent_or_rate - p).abs() < 1e-8);
        prop_assert!((fit.prefactor / a - 1.0).abs() < 1e-7);
        prop_assert!(fit.residual < 1e-8);
    }

    #[test]
    fn exponential_fit_is_exact(c in 1e-3f64..0.5, a in 0.01f64..10.0, n in 4usize..20) {
        let pts: Vec<(f64, f64)> = log_grid(c / 10.0, c * 3.0, n).into_iter().map(|e| (e, a * (-c / e).exp())).collect();
        let fit = fit_exponential(&pts).unwrap();
        prop_assert!((fit.exponent_or_rate / c - 1.0).abs() < 1e-8);
        prop_assert!((fit.prefactor / a - 1.0).abs() < 1e-7);
    }

    #[test]
    fn split_ignores_point_order(
        seed in proptest::collection::vec(0usize..1000, 12),
        noise in proptest::collection::vec(-0.05f64..0.05, 12),
    ) {
        let eps = log_grid(1e-4, 1e-1, 12);
        let mut pts = piecewise_curve(&eps, eps[6], 2.0, 0.03);
        for (p, z) in pts.iter_mut().zip(&noise) {
            p.1 *= z.exp();
        }
        let reference = split_regimes(&pts).unwrap();
        let mut shuffled: Vec<(usize, (f64, f64))> = seed.into_iter().zip(pts).collect();
        shuffled.sort_by_key(|(k, _)| *k);
        let shuffled: Vec<(f64, f64)> = shuffled.into_iter().map(|(_, p)| p).collect();
        let again = split_regimes(&shuffled).unwrap();
        prop_assert_eq!(reference.crossover, again.crossover);
        prop_assert_eq!(reference.degenerate, again.degenerate);
        prop_assert!((reference.residual - again.residual).abs() < 1e-12);
    }
}
