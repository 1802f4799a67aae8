use blowup_core::blowup::{estimate_blowup_shooting, integrate, integrate_to, IntegratorConfig};
use blowup_core::series::{estimate_blowup_series, taylor_coefficients};
use proptest::prelude::*;

#[test]
fn series_partial_sum_matches_integrated_x() {
    let coeffs = taylor_coefficients(2, 256).unwrap();
    let cfg = IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-16, ..Default::default() };
    let x = integrate_to(2, &cfg, 0.5).unwrap().last().x;
    let s = coeffs.partial_sum(0.5);
    assert!((s - x).abs() <= 1e-10 * x, "{s} vs {x}");
}

#[test]
fn estimators_agree_within_uncertainty() {
    let cfg = IntegratorConfig::default();
    for d in 1..=3 {
        let shoot = estimate_blowup_shooting(d, &cfg).unwrap();
        let series = estimate_blowup_series(&taylor_coefficients(d, 2048).unwrap()).unwrap();
        let diff = (shoot.t_blowup - series.t_blowup).abs();
        assert!(diff <= shoot.uncertainty + series.uncertainty, "d={d}: {diff:e} vs {:e} + {:e}", shoot.uncertainty, series.uncertainty);
    }
}

#[test]
fn series_ratio_approaches_inverse_radius() {
    // c[m] = a[m(d+1)] has ratio c[m]/c[m-1] → T^-(d+1).
    let d = 2;
    let coeffs = taylor_coefficients(d, 2048).unwrap();
    let t = estimate_blowup_series(&coeffs).unwrap().t_blowup;
    // Scaled coefficients carry ρⁿ, so the scaled ratio tends to (ρ/T)^(d+1).
    let target = (coeffs.scale / t).powi(d as i32 + 1);
    let ratio = |m: usize| coeffs.a_scaled[m * (d + 1)] / coeffs.a_scaled[(m - 1) * (d + 1)];
    let early = (ratio(20) - target).abs();
    let late = (ratio(600) - target).abs();
    assert!(late < early / 10.0, "{early:e} {late:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coefficients_are_nonnegative(d in 1usize..=12, n in 16usize..600) {
        let c = taylor_coefficients(d, n.max(d + 2)).unwrap();
        for k in 0..c.len() {
            prop_assert!(c.a_scaled[k] >= 0.0 && c.b_scaled[k] >= 0.0, "d={} k={}", d, k);
        }
    }

    #[test]
    fn integrated_jets_are_absolutely_monotone(d in 1usize..=6, exp in 6i32..=12) {
        let tol = 10f64.powi(-exp);
        let cfg = IntegratorConfig { rel_tol: tol, abs_tol: tol * 1e-2, y_max: 1e6, ..Default::default() };
        let traj = integrate(d, &cfg).unwrap();
        prop_assert!(traj.reached_y_max);
        for pair in traj.jets.windows(2) {
            prop_assert!(pair[1].t > pair[0].t);
            for i in 0..=d {
                prop_assert!(pair[1].jet[i] >= pair[0].jet[i] && pair[1].jet[i] >= 0.0);
            }
            prop_assert!(pair[1].jet[d] >= 1.0);
        }
    }
}
