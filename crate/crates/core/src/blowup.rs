//! The Cauchy problem `y^(d+1) = y · y^(d)` with `y(0) = … = y^(d-1)(0) = 0`,
//! `y^(d)(0) = 1`, integrated toward its finite-time singularity.
//!
//! The state carried by the integrator is the jet `(y, y', …, y^(d))`
//! augmented with `x = ∫₀ᵗ y`, so that `x(t) = ln y^(d)(t)` and the
//! unburned probability `exp(-x)` are available step-accurately.

use std::f64::consts::{PI, SQRT_2};
use std::io::{self, Write};

use thiserror::Error;

use crate::rk::{DormandPrince, OdeSystem, StepError, Tolerances};

/// Blow-up time for `d = 1`, `π/√2`.
pub const T_D1: f64 = PI / SQRT_2;

/// Safety factor on the distance to the running pole estimate.
const POLE_STEP_FRACTION: f64 = 0.1;
/// Samples used by the shooting extrapolation.
const SHOOTING_SAMPLES: usize = 16;
/// Decades of `y` spanned by the shooting samples.
const SHOOTING_DECADES: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlowupError {
    #[error("order d must be at least 1")]
    ZeroOrder,
    #[error("jet has length {got}, expected d + 1 = {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("step size underflow at t = {t} before reaching y_max (y = {y:e})")]
    StepUnderflow { t: f64, y: f64 },
    #[error("invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },
    #[error("shooting extrapolation is only offered for d in [1, 10], got {0}")]
    OrderOutOfRange(usize),
    #[error("y_max = {y_max:e} not reached within {steps} steps")]
    YMaxNotReached { y_max: f64, steps: usize },
    #[error("t = {0} is outside [0, π/√2)")]
    OutOfDomain(f64),
    #[error("extrapolated blow-up times are not monotone (reverse excursion {excursion:e} > {slack:e}); increase y_max")]
    NonMonotone {
        excursion: f64,
        slack: f64,
        estimate: BlowupEstimate,
    },
    #[error("t_end = {t_end} is past the blow-up time estimate {t_blowup}")]
    PastBlowup { t_end: f64, t_blowup: f64 },
}

/// A time point and the derivatives `(y, y', …, y^(d))` there, plus `x = ∫₀ᵗ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeJet {
    pub t: f64,
    pub jet: Vec<f64>,
    pub x: f64,
}

impl DerivativeJet {
    pub fn d(&self) -> usize {
        self.jet.len() - 1
    }

    pub fn y(&self) -> f64 {
        self.jet[0]
    }

    /// `y^(d+1) = y · y^(d)`.
    pub fn top_derivative(&self) -> f64 {
        self.jet[0] * self.jet[self.d()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    ShootingExtrapolation,
    SeriesRadius,
}

impl std::fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ShootingExtrapolation => f.write_str("shooting-extrapolation"),
            Self::SeriesRadius => f.write_str("series-radius"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEstimate {
    pub t_blowup: f64,
    pub method: EstimateMethod,
    /// Half-width of the agreement interval.
    pub uncertainty: f64,
    pub d: usize,
}

impl BlowupEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (self.t_blowup - value).abs() <= self.uncertainty
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integration stops once `y` reaches this value.
    pub y_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            y_max: 1e8,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), BlowupError> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.rel_tol) {
            return Err(BlowupError::InvalidConfig(format!("rel_tol = {} not in (0, 1)", self.rel_tol)));
        }
        if !in_unit(self.abs_tol) {
            return Err(BlowupError::InvalidConfig(format!("abs_tol = {} not in (0, 1)", self.abs_tol)));
        }
        if !(self.y_max >= 1e3) || !self.y_max.is_finite() {
            return Err(BlowupError::InvalidConfig(format!("y_max = {} must be finite and >= 1e3", self.y_max)));
        }
        if self.max_steps == 0 {
            return Err(BlowupError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
        }
    }
}

/// Right-hand side of the Cauchy problem on the jet:
/// `(y, …, y^(d)) ↦ (y', …, y^(d), y · y^(d))`.
pub fn cauchy_field(jet: &[f64], d: usize) -> Result<Vec<f64>, BlowupError> {
    if d == 0 {
        return Err(BlowupError::ZeroOrder);
    }
    if jet.len() != d + 1 {
        return Err(BlowupError::DimensionMismatch {
            expected: d + 1,
            got: jet.len(),
        });
    }
    let mut out = Vec::with_capacity(d + 1);
    out.extend_from_slice(&jet[1..]);
    out.push(jet[0] * jet[d]);
    Ok(out)
}

/// Jet plus the running integral `x = ∫ y` as one first-order system.
pub(crate) struct AugmentedCauchy {
    pub d: usize,
}

impl OdeSystem for AugmentedCauchy {
    fn dim(&self) -> usize {
        self.d + 2
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.d;
        dy[..d].copy_from_slice(&y[1..=d]);
        dy[d] = y[0] * y[d];
        dy[d + 1] = y[0];
    }
}

/// Accepted steps of one integration run, starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub d: usize,
    pub jets: Vec<DerivativeJet>,
    pub reached_y_max: bool,
}

impl Trajectory {
    pub fn last(&self) -> &DerivativeJet {
        self.jets.last().expect("trajectory always contains t = 0")
    }

    /// Crude pole location `t + (d+1)/y` at the last sample.
    pub fn pole_hint(&self) -> f64 {
        let last = self.last();
        if last.y() > 0.0 {
            last.t + (self.d as f64 + 1.0) / last.y()
        } else {
            f64::INFINITY
        }
    }

    /// CSV with header `t,y0,...,yd,x`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 0..=self.d {
            header.push_str(&format!(",y{i}"));
        }
        header.push_str(",x");
        writeln!(w, "{header}")?;
        for j in &self.jets {
            let mut line = crate::fmt17(j.t);
            for v in &j.jet {
                line.push(',');
                line.push_str(&crate::fmt17(*v));
            }
            line.push(',');
            line.push_str(&crate::fmt17(j.x));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn initial_state(d: usize) -> Vec<f64> {
    let mut y0 = vec![0.0; d + 2];
    y0[d] = 1.0;
    y0
}

fn jet_of(t: f64, state: &[f64], d: usize) -> DerivativeJet {
    DerivativeJet {
        t,
        jet: state[..=d].to_vec(),
        x: state[d + 1],
    }
}

fn check_invariants(prev: &DerivativeJet, next: &DerivativeJet) -> Result<(), BlowupError> {
    let d = next.d();
    for i in 0..=d {
        if next.jet[i] < 0.0 {
            return Err(BlowupError::InvariantViolation {
                t: next.t,
                what: format!("y^({i}) = {:e} < 0", next.jet[i]),
            });
        }
        if next.jet[i] < prev.jet[i] {
            return Err(BlowupError::InvariantViolation {
                t: next.t,
                what: format!("y^({i}) decreased from {:e} to {:e}", prev.jet[i], next.jet[i]),
            });
        }
    }
    if next.jet[d] < 1.0 {
        return Err(BlowupError::InvariantViolation {
            t: next.t,
            what: format!("y^({d}) = {} < 1", next.jet[d]),
        });
    }
    Ok(())
}

enum Stop {
    YMax(f64),
    Time(f64),
}

fn run(d: usize, config: &IntegratorConfig, stop: Stop) -> Result<Trajectory, BlowupError> {
    if d == 0 {
        return Err(BlowupError::ZeroOrder);
    }
    config.validate()?;
    let mut stepper = DormandPrince::new(AugmentedCauchy { d }, 0.0, &initial_state(d), config.tolerances());
    let mut jets = vec![jet_of(0.0, stepper.y(), d)];
    let dp1 = d as f64 + 1.0;
    let mut reached = false;

    for _ in 0..config.max_steps {
        let y = stepper.y()[0];
        let t = stepper.t();
        match stop {
            Stop::YMax(y_max) if y >= y_max => {
                reached = true;
                break;
            }
            Stop::Time(t_end) if t >= t_end => {
                reached = true;
                break;
            }
            Stop::Time(_) if y >= config.y_max => break,
            _ => {}
        }
        let mut cap = if y > 0.0 { POLE_STEP_FRACTION * dp1 / y } else { f64::INFINITY };
        if let Stop::Time(t_end) = stop {
            cap = cap.min(t_end - t);
        }
        stepper.step(cap, |_| true).map_err(|e| match e {
            StepError::Underflow { t, .. } | StepError::TooManyAttempts { t } => BlowupError::StepUnderflow { t, y },
        })?;
        let mut t_new = stepper.t();
        if let Stop::Time(t_end) = stop {
            // Land exactly on the requested time despite rounding in t + h.
            if (t_new - t_end).abs() <= 4.0 * f64::EPSILON * t_end.abs() {
                t_new = t_end;
            }
        }
        let next = jet_of(t_new, stepper.y(), d);
        check_invariants(jets.last().unwrap(), &next)?;
        jets.push(next);
    }
    if !reached {
        // One more look at the final state in case the last step got there.
        let last = jets.last().unwrap();
        reached = match stop {
            Stop::YMax(y_max) => last.y() >= y_max,
            Stop::Time(t_end) => last.t >= t_end,
        };
    }
    Ok(Trajectory {
        d,
        jets,
        reached_y_max: reached && matches!(stop, Stop::YMax(_)),
    })
}

/// Integrates from `t = 0` until `y ≥ y_max` or `max_steps` accepted steps.
pub fn integrate(d: usize, config: &IntegratorConfig) -> Result<Trajectory, BlowupError> {
    run(d, config, Stop::YMax(config.y_max))
}

/// Integrates from `t = 0` and lands exactly on `t_end`.
///
/// Fails with [`BlowupError::PastBlowup`] if `y` reaches `y_max` first.
pub fn integrate_to(d: usize, config: &IntegratorConfig, t_end: f64) -> Result<Trajectory, BlowupError> {
    if !(t_end >= 0.0) {
        return Err(BlowupError::InvalidConfig(format!("t_end = {t_end} must be >= 0")));
    }
    let traj = run(d, config, Stop::Time(t_end))?;
    if traj.last().t < t_end {
        let hint = traj.pole_hint();
        if hint <= t_end || traj.last().y() >= config.y_max {
            return Err(BlowupError::PastBlowup { t_end, t_blowup: hint });
        }
        return Err(BlowupError::YMaxNotReached {
            y_max: config.y_max,
            steps: config.max_steps,
        });
    }
    Ok(traj)
}

/// Shooting estimate of the blow-up time.
///
/// Uses the model `T̂(t) = t + (d+1)/y(t)` on `K = 16` accepted steps spaced
/// geometrically in `y` over the last three decades below `y_max`, and
/// extrapolates `T̂` linearly in `1/y` to `1/y = 0`.
pub fn estimate_blowup_shooting(d: usize, config: &IntegratorConfig) -> Result<BlowupEstimate, BlowupError> {
    if !(1..=10).contains(&d) {
        return Err(BlowupError::OrderOutOfRange(d));
    }
    let traj = integrate(d, config)?;
    shooting_from_trajectory(&traj, config)
}

pub fn shooting_from_trajectory(traj: &Trajectory, config: &IntegratorConfig) -> Result<BlowupEstimate, BlowupError> {
    let d = traj.d;
    if !traj.reached_y_max {
        return Err(BlowupError::YMaxNotReached {
            y_max: config.y_max,
            steps: config.max_steps,
        });
    }
    let dp1 = d as f64 + 1.0;
    let candidates: Vec<&DerivativeJet> = traj.jets.iter().filter(|j| j.y() > 0.0).collect();

    // Nearest accepted step (in log y) to each geometric target; ordered by increasing y.
    let mut picked: Vec<&DerivativeJet> = Vec::with_capacity(SHOOTING_SAMPLES);
    for k in (0..SHOOTING_SAMPLES).rev() {
        let target = (config.y_max.ln() - SHOOTING_DECADES * std::f64::consts::LN_10 * k as f64 / (SHOOTING_SAMPLES - 1) as f64).exp();
        let best = candidates
            .iter()
            .min_by(|a, b| {
                let da = (a.y() / target).ln().abs();
                let db = (b.y() / target).ln().abs();
                da.total_cmp(&db)
            })
            .copied()
            .expect("trajectory reached y_max");
        if picked.last().is_none_or(|p| p.t < best.t) {
            picked.push(best);
        }
    }

    let z: Vec<f64> = picked.iter().map(|j| 1.0 / j.y()).collect();
    let t_hat: Vec<f64> = picked.iter().map(|j| j.t + dp1 / j.y()).collect();

    let (intercept, _slope) = if picked.len() >= 2 {
        linear_fit(&z, &t_hat, None)
    } else {
        (t_hat[0], 0.0)
    };

    let max = t_hat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = t_hat.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = *t_hat.last().unwrap();
    let floor = 10.0 * config.rel_tol * intercept.abs();
    let uncertainty = (0.5 * (max - min)).max((intercept - last).abs()).max(floor);

    let estimate = BlowupEstimate {
        t_blowup: intercept,
        method: EstimateMethod::ShootingExtrapolation,
        uncertainty,
        d,
    };

    // Reverse excursions against the overall trend of T̂, compared with the
    // distance to the pole at the first sample.
    let total_variation: f64 = t_hat.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let net = (last - t_hat[0]).abs();
    let excursion = 0.5 * (total_variation - net);
    let slack = 1e-3 * dp1 * z[0] + 64.0 * f64::EPSILON * intercept.abs();
    if excursion > slack {
        return Err(BlowupError::NonMonotone {
            excursion,
            slack,
            estimate,
        });
    }
    Ok(estimate)
}

/// Weighted least squares `v ≈ a + b·u`; returns `(a, b)`.
pub(crate) fn linear_fit(u: &[f64], v: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut su, mut sv) = (0.0, 0.0, 0.0);
    for i in 0..u.len() {
        sw += w(i);
        su += w(i) * u[i];
        sv += w(i) * v[i];
    }
    let (um, vm) = (su / sw, sv / sw);
    let (mut suu, mut suv) = (0.0, 0.0);
    for i in 0..u.len() {
        let du = u[i] - um;
        suu += w(i) * du * du;
        suv += w(i) * du * (v[i] - vm);
    }
    let b = if suu > 0.0 { suv / suu } else { 0.0 };
    (vm - b * um, b)
}

/// Closed-form solution for `d = 1`: `y = √2 tan(t/√2)`, `y' = 1/cos²(t/√2)`,
/// `x = -2 ln cos(t/√2)`.
pub fn analytic_d1(t: f64) -> Result<DerivativeJet, BlowupError> {
    if !(0.0..T_D1).contains(&t) {
        return Err(BlowupError::OutOfDomain(t));
    }
    if t <= 0.5 * T_D1 {
        let a = t / SQRT_2;
        let c = a.cos();
        Ok(DerivativeJet {
            t,
            jet: vec![SQRT_2 * a.tan(), 1.0 / (c * c)],
            x: -2.0 * c.ln(),
        })
    } else {
        let mut j = analytic_d1_from_gap(T_D1 - t)?;
        j.t = t;
        Ok(j)
    }
}

/// Closed form for `d = 1` evaluated at `t = π/√2 - gap`, without the
/// cancellation of forming `T - t` near the pole.
pub fn analytic_d1_from_gap(gap: f64) -> Result<DerivativeJet, BlowupError> {
    if !(gap > 0.0 && gap <= T_D1) {
        return Err(BlowupError::OutOfDomain(T_D1 - gap));
    }
    // t/√2 = π/2 - gap/√2, so tan → cot and cos → sin.
    let b = gap / SQRT_2;
    let s = b.sin();
    Ok(DerivativeJet {
        t: T_D1 - gap,
        jet: vec![SQRT_2 * b.cos() / s, 1.0 / (s * s)],
        x: -2.0 * s.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_examples() {
        assert_eq!(cauchy_field(&[0.0, 0.0, 1.0], 2).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(cauchy_field(&[1.0, 2.0], 1).unwrap(), vec![2.0, 2.0]);
        assert_eq!(cauchy_field(&[1.0, 2.0, 3.0, 4.0], 3).unwrap(), vec![2.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn field_rejects_bad_input() {
        assert_eq!(
            cauchy_field(&[1.0, 2.0], 2),
            Err(BlowupError::DimensionMismatch { expected: 3, got: 2 })
        );
        assert_eq!(cauchy_field(&[1.0], 0), Err(BlowupError::ZeroOrder));
        assert!(matches!(integrate(0, &IntegratorConfig::default()), Err(BlowupError::ZeroOrder)));
    }

    #[test]
    fn config_validation() {
        let bad = [
            IntegratorConfig { rel_tol: 0.0, ..Default::default() },
            IntegratorConfig { abs_tol: 1.0, ..Default::default() },
            IntegratorConfig { y_max: 10.0, ..Default::default() },
            IntegratorConfig { max_steps: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(BlowupError::InvalidConfig(_))));
        }
        IntegratorConfig::default().validate().unwrap();
    }

    #[test]
    fn analytic_examples() {
        let j = analytic_d1(0.0).unwrap();
        assert_eq!(j.jet, vec![0.0, 1.0]);
        let half = analytic_d1(PI / (2.0 * SQRT_2)).unwrap();
        assert!((half.y() - SQRT_2).abs() < 1e-14);
        for gap in [1e-3, 1e-5, 1e-7] {
            let j = analytic_d1_from_gap(gap).unwrap();
            assert!(((gap * j.y()) - 2.0).abs() < 2.0 * gap);
        }
        assert!(analytic_d1(T_D1).is_err());
        assert!(analytic_d1(-0.1).is_err());
    }

    #[test]
    fn analytic_branches_agree() {
        // Both evaluation branches describe the same function.
        let t = 0.5 * T_D1 + 1e-3;
        let near = analytic_d1(t).unwrap();
        let a = t / SQRT_2;
        assert!((near.y() - SQRT_2 * a.tan()).abs() < 1e-12 * near.y());
        assert!((near.x + 2.0 * a.cos().ln()).abs() < 1e-12);
    }

    #[test]
    fn d1_matches_closed_form_at_every_step() {
        let cfg = IntegratorConfig { y_max: 1e6, ..Default::default() };
        let traj = integrate(1, &cfg).unwrap();
        assert!(traj.reached_y_max);
        for j in traj.jets.iter().filter(|j| j.t > 0.0) {
            let exact = analytic_d1(j.t).unwrap();
            // Relative error in y grows like (condition number near the pole) × tol.
            let rel = (j.y() - exact.y()).abs() / exact.y();
            let amp = exact.y().max(1.0);
            assert!(rel < 1e-9 * amp.sqrt().max(1.0), "t = {} rel {rel:e}", j.t);
        }
    }

    #[test]
    fn d1_value_at_one() {
        let traj = integrate_to(1, &IntegratorConfig::default(), 1.0).unwrap();
        let last = traj.last();
        assert_eq!(last.t, 1.0);
        let exact = SQRT_2 * (1.0 / SQRT_2).tan();
        assert!((last.y() - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn small_time_slope() {
        let traj = integrate_to(1, &IntegratorConfig::default(), 1e-4).unwrap();
        let j = traj.last();
        assert!((j.y() / j.t - 1.0).abs() < 1e-6);
    }

    #[test]
    fn d2_matches_tightened_run() {
        let loose = integrate_to(2, &IntegratorConfig::default(), 0.1).unwrap();
        let tight = integrate_to(
            2,
            &IntegratorConfig { rel_tol: 1e-14, abs_tol: 1e-18, ..Default::default() },
            0.1,
        )
        .unwrap();
        let (a, b) = (loose.last().y(), tight.last().y());
        assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
        // y(0.1) ≈ 0.1²/2 for small t.
        assert!((b / 0.005 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn log_integral_identity() {
        for d in 1..=4 {
            let traj = integrate(d, &IntegratorConfig { y_max: 1e6, ..Default::default() }).unwrap();
            for j in &traj.jets {
                let lhs = j.x;
                let rhs = j.jet[d].ln();
                assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "d={d} t={} {lhs} vs {rhs}", j.t);
            }
        }
    }

    #[test]
    fn rough_bounds_near_pole() {
        for d in 1..=4 {
            let cfg = IntegratorConfig::default();
            let traj = integrate(d, &cfg).unwrap();
            let est = shooting_from_trajectory(&traj, &cfg).unwrap();
            let t_big = est.t_blowup;
            for j in traj.jets.iter().filter(|j| t_big - j.t < 0.1 * t_big && j.y() > 0.0) {
                let gap = t_big - j.t;
                assert!(gap * j.y() >= 2.0 - 0.05, "d={d}: (T-t)y = {}", gap * j.y());
                for i in 1..=d {
                    let ratio = j.jet[i] / (j.y() * j.jet[i - 1]);
                    assert!(ratio <= 1.05, "d={d} i={i} ratio {ratio}");
                }
            }
        }
    }

    #[test]
    fn shooting_d1() {
        let est = estimate_blowup_shooting(1, &IntegratorConfig::default()).unwrap();
        assert!((est.t_blowup - T_D1).abs() < 1e-6);
        assert!(est.contains(T_D1), "{est:?}");
        assert!(est.t_blowup.is_finite() && est.t_blowup > 0.0);
    }

    #[test]
    fn shooting_consistent_across_y_max() {
        let lo = estimate_blowup_shooting(1, &IntegratorConfig { y_max: 1e4, ..Default::default() }).unwrap();
        let hi = estimate_blowup_shooting(1, &IntegratorConfig { y_max: 1e8, ..Default::default() }).unwrap();
        assert!((lo.t_blowup - hi.t_blowup).abs() <= lo.uncertainty + hi.uncertainty);
    }

    #[test]
    fn shooting_gated_to_d_le_10() {
        assert_eq!(
            estimate_blowup_shooting(11, &IntegratorConfig::default()),
            Err(BlowupError::OrderOutOfRange(11))
        );
        assert_eq!(estimate_blowup_shooting(0, &IntegratorConfig::default()), Err(BlowupError::OrderOutOfRange(0)));
    }

    #[test]
    fn integrate_to_past_pole_fails() {
        let r = integrate_to(1, &IntegratorConfig::default(), 3.0);
        assert!(matches!(r, Err(BlowupError::PastBlowup { .. })), "{r:?}");
    }

    #[test]
    fn max_steps_truncates() {
        let traj = integrate(2, &IntegratorConfig { max_steps: 5, ..Default::default() }).unwrap();
        assert!(!traj.reached_y_max);
        assert_eq!(traj.jets.len(), 6);
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = integrate(2, &IntegratorConfig { max_steps: 3, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,y0,y1,y2,x");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert_eq!(row[3].parse::<f64>().unwrap(), 1.0);
    }
}
