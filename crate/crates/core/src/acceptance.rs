//! The acceptance suite: one check per criterion, each with pinned
//! tolerances. Shared by the `acceptance` test target and `check-all`.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_bigint::BigInt;

use crate::blowup::{
    analytic_d1_from_gap, estimate_blowup_shooting, integrate, integrate_to, BlowupError, BlowupEstimate, IntegratorConfig, T_D1,
};
use crate::burning::{
    coverage_rate_check, mc_unburned_fraction, time_for_unburned_probability, unburned_probability_analytic,
    unburned_probability_convolution, BurnWindow, IntensityProfile,
};
use crate::lv::{
    distance_to_star, final_sup_distance, m_value, permanence_floor, seeded_initial_condition, simulate, time_average_check_at, LVModel,
};
use crate::lyapunov::{leading_minors_exact, published_lambda, search_lambda, FEASIBILITY_THRESHOLD, PUBLISHED_MINORS};
use crate::series::{estimate_blowup_series, taylor_coefficients};
use crate::timechange::{cascade, d1_exact_estimate, d1_oracle_jets, CascadeReport};

/// Coefficients used by the series estimator in the suite.
pub const SERIES_TERMS: usize = 2048;
/// Restarts of the λ search.
pub const SEARCH_RESTARTS: usize = 50;
/// Ascent iterations per restart.
pub const SEARCH_ITERATIONS: usize = 20_000;
/// Seed of the λ search.
pub const SEARCH_SEED: u64 = 1;
/// Integration tolerance of the Lotka–Volterra runs.
pub const LV_TOL: f64 = 1e-10;
/// Monte Carlo trials for the burning check.
pub const BURN_TRIALS: usize = 10_000;
/// Seed of the burning Monte Carlo.
pub const BURN_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckOutcome {
    /// `PASS [ 1] name (0.12 s): detail`.
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    /// Wall-clock limit, if the criterion has one.
    pub budget: Option<Duration>,
    check: fn() -> Result<(bool, String), String>,
}

impl Criterion {
    pub fn run(&self) -> CheckOutcome {
        let start = Instant::now();
        let result = (self.check)();
        let elapsed = start.elapsed();
        let (mut passed, mut detail) = match result {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(budget) = self.budget {
            if elapsed > budget {
                passed = false;
                let _ = write!(detail, "; over the {:.0} s budget", budget.as_secs_f64());
            }
        }
        CheckOutcome {
            id: self.id,
            name: self.name,
            passed,
            detail,
            elapsed,
        }
    }
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "d1-blowup-time", budget: Some(Duration::from_secs(5)), check: d1_blowup_time },
    Criterion { id: 2, name: "estimator-agreement", budget: Some(Duration::from_secs(30)), check: estimator_agreement },
    Criterion { id: 3, name: "derivative-rates", budget: None, check: derivative_rates },
    Criterion { id: 4, name: "log-integral-rate", budget: None, check: log_integral_rate },
    Criterion { id: 5, name: "published-minors", budget: Some(Duration::from_secs(1)), check: published_minors },
    Criterion { id: 6, name: "feasibility-transition", budget: Some(Duration::from_secs(120)), check: feasibility_transition },
    Criterion { id: 7, name: "lv-convergence", budget: None, check: lv_convergence },
    Criterion { id: 8, name: "lv-time-averages", budget: None, check: lv_time_averages },
    Criterion { id: 9, name: "lv-persistent-oscillation", budget: None, check: lv_persistent_oscillation },
    Criterion { id: 10, name: "burning-probability", budget: None, check: burning_probability },
    Criterion { id: 11, name: "coverage-exponent", budget: None, check: coverage_exponent },
    Criterion { id: 12, name: "cascade-refinement", budget: None, check: cascade_refinement },
];

pub fn criterion(id: u32) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CheckOutcome> {
    CRITERIA.iter().map(Criterion::run).collect()
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

fn series_estimate(d: usize) -> Result<BlowupEstimate, String> {
    let coeffs = taylor_coefficients(d, SERIES_TERMS).map_err(|e| e.to_string())?;
    estimate_blowup_series(&coeffs).map_err(|e| e.to_string())
}

/// Shooting estimate; a non-monotone tail still yields its fitted value.
fn shooting_estimate(d: usize) -> Result<(BlowupEstimate, bool), String> {
    match estimate_blowup_shooting(d, &cfg()) {
        Ok(e) => Ok((e, true)),
        Err(BlowupError::NonMonotone { estimate, .. }) => Ok((estimate, false)),
        Err(e) => Err(e.to_string()),
    }
}

fn d1_blowup_time() -> Result<(bool, String), String> {
    let shoot = estimate_blowup_shooting(1, &cfg()).map_err(|e| e.to_string())?;
    let series = series_estimate(1)?;
    let es = (shoot.t_blowup - T_D1).abs();
    let er = (series.t_blowup - T_D1).abs();
    Ok((es <= 1e-6 && er <= 1e-6, format!("shooting error {es:.2e}, series error {er:.2e} (limit 1e-6)")))
}

fn estimator_agreement() -> Result<(bool, String), String> {
    let mut ok = true;
    let mut detail = String::new();
    for d in [2, 3] {
        let shoot = estimate_blowup_shooting(d, &cfg()).map_err(|e| e.to_string())?;
        let series = series_estimate(d)?;
        let diff = (shoot.t_blowup - series.t_blowup).abs();
        ok &= diff <= 1e-4;
        let _ = write!(detail, "d={d}: |shooting - series| = {diff:.2e}; ");
    }
    detail.push_str("limit 1e-4");
    Ok((ok, detail))
}

fn derivative_rates() -> Result<(bool, String), String> {
    let config = cfg();
    let mut ok = true;
    let mut detail = String::new();
    for d in [1usize, 2, 3, 5, 10] {
        let (est, monotone) = shooting_estimate(d)?;
        let traj = integrate(d, &config).map_err(|e| e.to_string())?;
        let last = traj.jets.iter().rev().find(|j| j.y() < config.y_max).ok_or("no sample below y_max")?;
        let gap = est.t_blowup - last.t;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut fact = 1.0;
        for i in 0..=d {
            if i > 0 {
                fact *= i as f64;
            }
            let r = gap.powi(i as i32 + 1) * last.jet[i] / ((d as f64 + 1.0) * fact);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let pass = lo >= 0.95 && hi <= 1.05;
        ok &= pass;
        let _ = write!(
            detail,
            "d={d}: ratios in [{lo:.4}, {hi:.4}] at T - t = {gap:.3e}{}{}; ",
            if pass { "" } else { " FAIL" },
            if monotone { "" } else { " (non-monotone shooting tail)" }
        );
    }
    detail.push_str("band [0.95, 1.05]");
    Ok((ok, detail))
}

fn log_integral_rate() -> Result<(bool, String), String> {
    const GAP: f64 = 1e-6;
    let mut ok = true;
    let mut detail = String::new();
    for d in [1usize, 2, 3] {
        let (est, _) = shooting_estimate(d)?;
        let traj = integrate_to(d, &cfg(), est.t_blowup - GAP).map_err(|e| e.to_string())?;
        let x = traj.last().x;
        let ratio = x / (1.0 / GAP).ln();
        let dp1 = d as f64 + 1.0;
        let rel = (ratio - dp1).abs() / dp1;
        let mut pass = rel <= 0.05;
        if d == 1 {
            let exact = analytic_d1_from_gap(GAP).map_err(|e| e.to_string())?.x;
            let agree = (x - exact).abs() <= 1e-6 * exact;
            pass &= agree;
            let _ = write!(detail, "d=1 closed form x = {exact:.10}, integrated {x:.10}; ");
        }
        ok &= pass;
        let _ = write!(detail, "d={d}: ratio {ratio:.5}, off by {:.2}%{}; ", 100.0 * rel, if pass { "" } else { " FAIL" });
    }
    detail.push_str("limit 5%");
    Ok((ok, detail))
}

fn published_minors() -> Result<(bool, String), String> {
    let minors = leading_minors_exact(&published_lambda()).map_err(|e| e.to_string())?;
    let want: Vec<BigInt> = PUBLISHED_MINORS.iter().map(|s| s.parse().expect("decimal literal")).collect();
    let matching = minors.iter().zip(&want).filter(|(a, b)| a == b).count();
    Ok((
        matching == want.len() && minors.len() == want.len(),
        format!("{matching}/{} minors equal, last = {}", want.len(), minors.last().map(|m| m.to_string()).unwrap_or_default()),
    ))
}

fn feasibility_transition() -> Result<(bool, String), String> {
    let mut ok = true;
    let mut detail = String::new();
    for d in 1..=11 {
        let c = search_lambda(d, SEARCH_RESTARTS, SEARCH_ITERATIONS, SEARCH_SEED);
        let pass = if d <= 10 { c.min_eig > FEASIBILITY_THRESHOLD } else { c.min_eig <= FEASIBILITY_THRESHOLD };
        ok &= pass;
        let _ = write!(detail, "d={d}: {:.3e}{}; ", c.min_eig, if pass { "" } else { " FAIL" });
    }
    detail.push_str("threshold 1e-8");
    Ok((ok, detail))
}

fn lv_convergence() -> Result<(bool, String), String> {
    const RUNS: u64 = 20;
    let mut ok = true;
    let mut detail = String::new();
    for d in 2..=10 {
        let model = LVModel::new(d).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for seed in 0..RUNS {
            let w0 = seeded_initial_condition(d, seed);
            let traj = simulate(&model, &w0, 500.0, LV_TOL).map_err(|e| e.to_string())?;
            worst = worst.max(final_sup_distance(&traj, &model));
        }
        let pass = worst < 1e-6;
        ok &= pass;
        let _ = write!(detail, "d={d}: worst {worst:.2e}{}; ", if pass { "" } else { " FAIL" });
    }
    detail.push_str("limit 1e-6 at t = 500");
    Ok((ok, detail))
}

fn lv_time_averages() -> Result<(bool, String), String> {
    const T_END: f64 = 1e4;
    let mut ok = true;
    let mut detail = String::new();
    for d in [11usize, 12] {
        let model = LVModel::new(d).map_err(|e| e.to_string())?;
        let traj = simulate(&model, &seeded_initial_condition(d, 1), T_END, LV_TOL).map_err(|e| e.to_string())?;
        let mut identity_ok = true;
        let mut worst_ratio = 0.0f64;
        for k in 1..=10 {
            let at = traj.index_at(1e3 * k as f64).ok_or("checkpoint outside the run")?;
            let r = time_average_check_at(&traj, &model, at);
            identity_ok &= r.passes();
            worst_ratio = worst_ratio.max(r.defect / r.tolerance);
        }
        let last = time_average_check_at(&traj, &model, traj.samples.len() - 1);
        let pass = identity_ok && last.distance_to_star < 5e-3;
        ok &= pass;
        let _ = write!(
            detail,
            "d={d}: max|avg - w*| = {:.2e}, identity defect/tolerance <= {worst_ratio:.2e}{}; ",
            last.distance_to_star,
            if pass { "" } else { " FAIL" }
        );
    }
    detail.push_str("limit 5e-3");
    Ok((ok, detail))
}

/// Every window `[t, t+100]` with `t ∈ [start, end]` contains a sample above `level`.
pub fn persistently_above(dist: &[(f64, f64)], start: f64, end: f64, width: f64, level: f64) -> bool {
    let hits: Vec<f64> = dist.iter().filter(|(t, v)| *t >= start && *t <= end + width && *v > level).map(|(t, _)| *t).collect();
    let (Some(&first), Some(&last)) = (hits.first(), hits.last()) else {
        return false;
    };
    first <= start + width && last >= end && hits.windows(2).all(|p| p[1] - p[0] <= width)
}

fn lv_persistent_oscillation() -> Result<(bool, String), String> {
    let d = 11;
    let model = LVModel::new(d).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut detail = String::new();
    for seed in 1..=4u64 {
        // `simulate` fails on any increase of M beyond the integration tolerance.
        let traj = simulate(&model, &seeded_initial_condition(d, seed), 1000.0, LV_TOL).map_err(|e| e.to_string())?;
        let dist = distance_to_star(&traj, &model);
        let above = persistently_above(&dist, 500.0, 900.0, 100.0, 1e-3);
        let floor = permanence_floor(&traj).map_err(|e| e.to_string())?;
        let m_drop = m_value(&traj.samples[0].w) - m_value(&traj.last().w);
        let pass = above && floor > 0.0;
        ok &= pass;
        let min_late = dist.iter().filter(|(t, _)| *t >= 500.0).map(|p| p.1).fold(f64::INFINITY, f64::min);
        let _ = write!(detail, "seed {seed}: min dist after 500 = {min_late:.3e}, floor {floor:.3e}, M drop {m_drop:.3e}{}; ", if pass { "" } else { " FAIL" });
    }
    Ok((ok, detail))
}

fn burning_probability() -> Result<(bool, String), String> {
    let config = cfg();
    let mut ok = true;
    let mut detail = String::new();
    for d in [1usize, 2] {
        for p in [0.5, 0.1] {
            let t = time_for_unburned_probability(d, p, &config).map_err(|e| e.to_string())?;
            let profile = IntensityProfile::compute(d, t, &config).map_err(|e| e.to_string())?;
            let traj = integrate_to(d, &config, t).map_err(|e| e.to_string())?;
            let exact = 1.0 / traj.last().jet[d];
            let analytic = unburned_probability_analytic(&profile, t).map_err(|e| e.to_string())?;
            let conv = unburned_probability_convolution(&profile, t).map_err(|e| e.to_string())?;
            let window = BurnWindow::new(d, 0.0, t).map_err(|e| e.to_string())?;
            let mc = mc_unburned_fraction(&window, &profile, t, BURN_TRIALS, BURN_SEED).map_err(|e| e.to_string())?;
            let formulas = (analytic - conv).abs() <= 1e-8 * analytic && (analytic - exact).abs() <= 1e-8 * exact;
            let sigmas = (mc.estimate - exact).abs() / mc.stderr;
            let pass = formulas && mc.within(exact, 3.0);
            ok &= pass;
            let _ = write!(
                detail,
                "d={d} p={p}: 1/y^(d) = {exact:.6}, formula gap {:.1e}, MC {:.4} ({sigmas:.2} se){}; ",
                (analytic - conv).abs() / analytic,
                mc.estimate,
                if pass { "" } else { " FAIL" }
            );
        }
    }
    Ok((ok, detail))
}

fn coverage_exponent() -> Result<(bool, String), String> {
    let est = estimate_blowup_shooting(1, &cfg()).map_err(|e| e.to_string())?;
    let rows = coverage_rate_check(1, &est, &[1e-2, 1e-3, 1e-4], 0, 0, &cfg()).map_err(|e| e.to_string())?;
    let exps: Vec<f64> = rows.iter().map(|r| r.analytic_exponent).collect();
    let monotone = exps.windows(2).all(|w| (w[1] - 2.0).abs() < (w[0] - 2.0).abs());
    let close = (exps[2] - 2.0).abs() <= 0.2;
    Ok((monotone && close, format!("exponents {:.5} {:.5} {:.5}; monotone {monotone}", exps[0], exps[1], exps[2])))
}

fn residual_maxima(r: &CascadeReport) -> [(&'static str, f64); 5] {
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    [
        ("u-system", max(&r.system_u)),
        ("chain-rule", max(&r.chain_rule)),
        ("w-system", max(&r.system_w)),
        ("v0-identity", r.identity_v0.max_defect),
        ("psi-identity", r.identity_psi),
    ]
}

fn cascade_refinement() -> Result<(bool, String), String> {
    let est = d1_exact_estimate();
    let (_, _, _, coarse) = cascade(&d1_oracle_jets(10.0, 500), &est).map_err(|e| e.to_string())?;
    let (_, _, _, fine) = cascade(&d1_oracle_jets(10.0, 1000), &est).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut detail = String::new();
    for ((name, a), (_, b)) in residual_maxima(&coarse).into_iter().zip(residual_maxima(&fine)) {
        let factor = a / b;
        ok &= factor >= 2.0;
        let _ = write!(detail, "{name} x{factor:.2}; ");
    }
    detail.push_str("need x2");
    Ok((ok, detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persistence_windows() {
        let dist: Vec<(f64, f64)> = (0..=1000).map(|t| (t as f64, if t % 50 == 0 { 1.0 } else { 0.0 })).collect();
        assert!(persistently_above(&dist, 500.0, 900.0, 100.0, 1e-3));
        let gap: Vec<(f64, f64)> = dist.iter().map(|&(t, v)| (t, if (650.0..800.0).contains(&t) { 0.0 } else { v })).collect();
        assert!(!persistently_above(&gap, 500.0, 900.0, 100.0, 1e-3));
        assert!(!persistently_above(&[], 500.0, 900.0, 100.0, 1e-3));
    }

    #[test]
    fn ids_are_ordered() {
        assert!(CRITERIA.iter().enumerate().all(|(k, c)| c.id == k as u32 + 1));
        assert!(criterion(5).is_some() && criterion(13).is_none());
    }
}
