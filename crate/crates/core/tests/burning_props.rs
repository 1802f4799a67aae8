use blowup_core::blowup::IntegratorConfig;
use blowup_core::burning::{
    expected_count, first_burn, is_burned, mc_unburned_fraction, render_field, sample_atoms, time_for_unburned_probability,
    unburned_probability_analytic, unburned_probability_convolution, BurnRaster, BurnWindow, IntensityProfile, PoissonAtom,
};
use proptest::prelude::*;

fn atom_strategy(d: usize) -> impl Strategy<Value = PoissonAtom> {
    (prop::collection::vec(-5.0f64..5.0, d), 0.0f64..3.0).prop_map(|(x, s)| PoissonAtom { x, s })
}

fn burned_cells(r: &BurnRaster) -> Vec<Vec<bool>> {
    (0..r.rows).map(|row| (0..r.resolution).map(|c| r.pixel(row, c).is_some()).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn burned_iff_first_arrival_has_passed(
        (z, atoms) in (1usize..=3).prop_flat_map(|d| (prop::collection::vec(-5.0f64..5.0, d), prop::collection::vec(atom_strategy(d), 0..20))),
        t in 0.0f64..6.0,
    ) {
        let want = first_burn(&z, &atoms).is_some_and(|(_, tau)| tau <= t);
        prop_assert_eq!(is_burned(&z, t, &atoms), want);
    }
}

#[test]
fn raster_rows_only_gain_burned_pixels() {
    let cfg = IntegratorConfig::default();
    let window = BurnWindow::new(1, 10.0, 2.0).unwrap();
    let profile = IntensityProfile::compute(1, 2.0, &cfg).unwrap();
    for seed in 0..5 {
        let atoms = sample_atoms(&window, &profile, seed).unwrap();
        let raster = render_field(&window, &atoms, 128).unwrap();
        let cells = burned_cells(&raster);
        for pair in cells.windows(2) {
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                assert!(!a || *b, "seed {seed}: pixel unburned again");
            }
        }
        let frac = raster.burned_fraction_per_row();
        assert!(frac.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn atoms_beyond_minimal_dilation_never_matter() {
    let cfg = IntegratorConfig::default();
    for (d, t_max, half_width) in [(1, 2.0, 6.0), (2, 2.5, 3.0)] {
        let profile = IntensityProfile::compute(d, t_max, &cfg).unwrap();
        let wide = BurnWindow::with_dilation(d, half_width, t_max, 2.0 * t_max).unwrap();
        let minimal = BurnWindow::new(d, half_width, t_max).unwrap();
        let reach = minimal.sampling_half_width();
        for seed in 0..4 {
            let atoms = sample_atoms(&wide, &profile, seed).unwrap();
            let inner: Vec<PoissonAtom> = atoms.iter().filter(|a| a.x.iter().all(|v| v.abs() <= reach)).cloned().collect();
            assert!(inner.len() < atoms.len(), "wide box adds atoms");
            let full = render_field(&wide, &atoms, 64).unwrap();
            let cut = render_field(&minimal, &inner, 64).unwrap();
            assert_eq!(burned_cells(&full), burned_cells(&cut), "d={d} seed {seed}");
            for (a, b) in full.first_time.iter().zip(&cut.first_time) {
                if a.min(*b) <= t_max {
                    assert_eq!(a, b);
                }
            }
        }
    }
}

#[test]
fn atom_count_is_poisson_with_the_right_mean() {
    let cfg = IntegratorConfig::default();
    let window = BurnWindow::new(1, 5.0, 2.0).unwrap();
    let profile = IntensityProfile::compute(1, 2.0, &cfg).unwrap();
    let mean = expected_count(&window, &profile, 2.0).unwrap();
    let n = 1000;
    let total: usize = (0..n).map(|seed| sample_atoms(&window, &profile, seed).unwrap().len()).sum();
    let avg = total as f64 / n as f64;
    let sigma = (mean / n as f64).sqrt();
    assert!((avg - mean).abs() <= 3.0 * sigma, "{avg} vs {mean} (sigma {sigma})");
}

#[test]
fn ignition_times_follow_the_intensity() {
    let cfg = IntegratorConfig::default();
    let t_max = 2.0;
    let window = BurnWindow::new(1, 5.0, t_max).unwrap();
    let profile = IntensityProfile::compute(1, t_max, &cfg).unwrap();
    let top = profile.cumulative(t_max).unwrap();
    // Equiprobable bins under the CDF y^(d-1)(s)/y^(d-1)(t_max).
    let bins = 20;
    let edges: Vec<f64> = (1..bins).map(|k| profile.invert(top * k as f64 / bins as f64)).collect();
    let mut counts = vec![0usize; bins];
    let mut n = 0usize;
    for seed in 0..20 {
        for a in sample_atoms(&window, &profile, 1000 + seed).unwrap() {
            counts[edges.partition_point(|&e| e < a.s)] += 1;
            n += 1;
        }
    }
    let expected = n as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 19 degrees of freedom.
    assert!(chi2 < 36.19, "chi2 = {chi2} over {n} atoms: {counts:?}");
}

#[test]
fn three_sigma_intervals_cover_the_analytic_value() {
    let cfg = IntegratorConfig::default();
    let t = time_for_unburned_probability(1, 0.5, &cfg).unwrap();
    let profile = IntensityProfile::compute(1, t, &cfg).unwrap();
    let p = unburned_probability_analytic(&profile, t).unwrap();
    assert!((p - 0.5).abs() < 1e-9);
    let window = BurnWindow::new(1, 0.0, t).unwrap();
    let covered = (0..100u64)
        .filter(|&k| mc_unburned_fraction(&window, &profile, t, 1000, 7000 + k).unwrap().within(p, 3.0))
        .count();
    assert!(covered >= 99, "{covered}/100");
}

#[test]
fn doubling_trials_shrinks_stderr_by_root_two() {
    let cfg = IntegratorConfig::default();
    let t = time_for_unburned_probability(2, 0.5, &cfg).unwrap();
    let profile = IntensityProfile::compute(2, t, &cfg).unwrap();
    let window = BurnWindow::new(2, 0.0, t).unwrap();
    let small = mc_unburned_fraction(&window, &profile, t, 4000, 3).unwrap();
    let large = mc_unburned_fraction(&window, &profile, t, 8000, 3).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((ratio - 2f64.sqrt()).abs() < 0.05, "{ratio}");
}

#[test]
fn both_probability_formulas_agree() {
    let cfg = IntegratorConfig::default();
    for d in 1..=5 {
        let t_max = time_for_unburned_probability(d, 0.01, &cfg).unwrap();
        let profile = IntensityProfile::compute(d, t_max, &cfg).unwrap();
        for k in 1..=8 {
            let t = t_max * k as f64 / 8.0;
            let a = unburned_probability_analytic(&profile, t).unwrap();
            let c = unburned_probability_convolution(&profile, t).unwrap();
            assert!((a - c).abs() <= 1e-8, "d={d} t={t}: {a} vs {c}");
        }
    }
}
