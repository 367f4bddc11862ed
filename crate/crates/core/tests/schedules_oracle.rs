mod common;

use adiabat::models::{IsingChain, DEFAULT_MEMORY_CAP};
use adiabat::schedules::*;
use adiabat::specfun::Interval01;
use adiabat::spectral::gap_profile;
use common::{integrate, open_grid};
use proptest::prelude::*;

fn cosine_weight(x: f64) -> f64 {
    truncated_cosine(Interval01::saturating(x))
}

#[test]
fn constant_gap_reduces_to_normalized_antiderivative() {
    let flat = TabulatedGap::constant(1.0).unwrap();
    let s = gap_informed_schedule(&flat, &cosine_weight, DEFAULT_GAP_FIT_DEGREE).unwrap();
    let total = integrate(&cosine_weight, 0.0, 1.0, 1e-14);
    for x in open_grid(0.0, 1.0, 200) {
        let want = integrate(&cosine_weight, 0.0, x, 1e-14) / total;
        assert!((s.value(x) - want).abs() < 1e-7, "x = {x}: {} vs {want}", s.value(x));
    }
    assert_eq!(s.value(0.0), 0.0);
    assert_eq!(s.value(1.0), 1.0);
}

#[test]
fn weight_integrates_to_closed_form() {
    use std::f64::consts::PI;
    let closed = |x: f64| (0.75 * PI * x * x + (PI * x).sin() / PI - x) / (1.5 * PI - 2.0);
    for x in open_grid(0.0, 1.0, 50) {
        assert!((integrate(&cosine_weight, 0.0, x, 1e-14) - closed(x)).abs() < 1e-12);
    }
}

#[test]
fn gap_informed_speed_follows_weighted_gap() {
    let chain = IsingChain::new(7, DEFAULT_MEMORY_CAP).unwrap();
    let profile = gap_profile(&chain, 101).unwrap();
    let s = gap_informed_schedule(profile.as_table(), &cosine_weight, DEFAULT_GAP_FIT_DEGREE).unwrap();
    let fit = s.gap_polynomial().unwrap();
    let ratios: Vec<f64> = open_grid(0.15, 0.95, 60)
        .into_iter()
        .map(|x| s.derivative(x) / (cosine_weight(x) * profile.eval(s.value(x))))
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for r in &ratios {
        assert!((r / mean - 1.0).abs() < 0.05 + 20.0 * fit.fit_rms, "ratio {r}, mean {mean}");
    }
    // slowest where the gap is smallest
    let (s_min, _) = profile.minimum();
    let x_min = open_grid(0.0, 1.0, 999)
        .into_iter()
        .min_by(|a, b| (s.value(*a) - s_min).abs().total_cmp(&(s.value(*b) - s_min).abs()))
        .unwrap();
    let speed_at_min = s.derivative(x_min);
    assert!(speed_at_min < s.derivative(0.5 * x_min).max(s.derivative(0.5 + 0.5 * x_min)));
}

#[test]
fn measured_orders() {
    assert_eq!(measure_boundary_order(&linear_schedule(), 1e-6), BoundaryOrder::Finite(0));
    for n in 0..4 {
        assert_eq!(measure_boundary_order(&beta_schedule(n), 1e-6), BoundaryOrder::Finite(n));
    }
    let sqrt = sqrt_schedule(linear_schedule(), DEFAULT_SMOOTHING_WIDTH).unwrap();
    assert_eq!(measure_boundary_order(&sqrt, 1e-6), BoundaryOrder::Diverging);
    // the linear reference contributes one extra vanishing derivative
    for n in 0..4 {
        let s = smoothed_beta_schedule(n, linear_schedule(), DEFAULT_SMOOTHING_WIDTH).unwrap();
        assert_eq!(measure_boundary_order(&s, 1e-6), BoundaryOrder::Finite(n + 1));
    }
}

fn any_schedule() -> impl Strategy<Value = Schedule> {
    prop_oneof![
        Just(linear_schedule()),
        (0u32..6).prop_map(beta_schedule),
        (0u32..4, 0.02f64..0.45).prop_map(|(n, d)| smoothed_beta_schedule(n, linear_schedule(), d).unwrap()),
        (0u32..3, 0u32..3, 0.05f64..0.4)
            .prop_map(|(n, m, d)| smoothed_beta_schedule(n, beta_schedule(m), d).unwrap()),
        (0.02f64..0.25).prop_map(|d| sqrt_schedule(linear_schedule(), d).unwrap()),
    ]
}

proptest! {
    #[test]
    fn beta_is_point_symmetric(n in 0u32..8, x in 0.0f64..1.0) {
        let s = beta_schedule(n);
        prop_assert!((s.value(x) + s.value(1.0 - x) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn schedules_are_monotone_with_fixed_ends(s in any_schedule(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assert_eq!(s.value(0.0), 0.0);
        prop_assert!((s.value(1.0) - 1.0).abs() < 1e-15);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(s.value(lo) <= s.value(hi) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&s.value(a)));
        prop_assert!(s.derivative(a) >= -1e-12);
    }

    #[test]
    fn derivative_matches_difference_quotient(s in any_schedule(), x in 0.01f64..0.99) {
        let h = 1e-6;
        let fd = (s.value(x + h) - s.value(x - h)) / (2.0 * h);
        let scale = 1.0 + s.derivative(x).abs();
        // kinks of the piecewise forms are only C^n; stay off them
        let near_kink = s.breakpoints().iter().any(|b| (b - x).abs() < 1e-4);
        prop_assume!(!near_kink);
        prop_assert!((fd - s.derivative(x)).abs() < 1e-5 * scale, "fd {} vs {}", fd, s.derivative(x));
    }

    #[test]
    fn complement_is_one_minus_value(s in any_schedule(), h in 0.0f64..1.0) {
        prop_assert!((s.complement(h) - (1.0 - s.value(1.0 - h))).abs() < 1e-14);
    }
}
