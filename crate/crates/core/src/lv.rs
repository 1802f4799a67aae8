//! The Lotka–Volterra system `w_i' = w_i (b_i − (A w)_i)` reached at the end
//! of the time-change cascade, with
//!
//! ```text
//!     [ 2 -1          ]        [0]
//!     [ 1  1 -1       ]        [⋮]
//! A = [ ⋮     ⋱  ⋱    ],   b = [0]
//!     [ 1        1 -1 ]        [1]
//!     [ 1           1 ]
//! ```
//!
//! and interior equilibrium `w* = A⁻¹b = (1, 2, …, d)/(d+1)`.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rk::{DormandPrince, OdeSystem, StepError, Tolerances};
use crate::timechange::derivative3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LvError {
    #[error("order d must be at least 1")]
    ZeroOrder,
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial condition must be componentwise positive, w0[{index}] = {value}")]
    NonPositiveInitial { index: usize, value: f64 },
    #[error("positivity could not be kept at t = {t}: step size fell below the minimum")]
    PositivityViolation { t: f64 },
    #[error("max(w, 1) increased from {before} to {after} at t = {t}")]
    MonotonicityViolation { t: f64, before: f64, after: f64 },
    #[error("trajectory ends at t = {t_end}, need t >= {need}")]
    TooShort { t_end: f64, need: f64 },
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LVModel {
    pub d: usize,
    /// Row-major `d × d` integer matrix.
    pub a: Vec<i64>,
    pub b: Vec<i64>,
    pub w_star: Vec<Rational64>,
}

impl LVModel {
    pub fn new(d: usize) -> Result<Self, LvError> {
        if d == 0 {
            return Err(LvError::ZeroOrder);
        }
        let mut a = vec![0i64; d * d];
        for i in 0..d {
            a[i * d] += 1;
            a[i * d + i] += 1;
            if i + 1 < d {
                a[i * d + i + 1] = -1;
            }
        }
        let mut b = vec![0i64; d];
        b[d - 1] = 1;
        let den = d as i64 + 1;
        let w_star = (1..=d as i64).map(|i| Rational64::new(i, den)).collect();
        Ok(Self { d, a, b, w_star })
    }

    pub fn a(&self, i: usize, j: usize) -> i64 {
        self.a[i * self.d + j]
    }

    pub fn w_star_f64(&self) -> Vec<f64> {
        self.w_star.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect()
    }

    /// `A·w* = b` in exact rational arithmetic.
    pub fn verify_stationary(&self) -> bool {
        (0..self.d).all(|i| {
            let row: Rational64 = (0..self.d).map(|j| Rational64::from_integer(self.a(i, j)) * self.w_star[j]).sum();
            row == Rational64::from_integer(self.b[i])
        })
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| self.a(i, j) as f64)
    }

    /// `‖A‖∞`, the largest absolute row sum.
    pub fn a_norm_inf(&self) -> f64 {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.a(i, j).abs()).sum::<i64>() as f64)
            .fold(0.0, f64::max)
    }

    /// `b_i − (A w)_i`, the per-capita growth rate of species `i`.
    pub fn growth_rate(&self, w: &[f64], i: usize) -> f64 {
        let mut r = self.b[i] as f64;
        for j in 0..self.d {
            let a = self.a(i, j);
            if a != 0 {
                r -= a as f64 * w[j];
            }
        }
        r
    }
}

/// `F(w)`, defined on all of `ℝ^d`.
pub fn lv_field(w: &[f64], model: &LVModel) -> Result<Vec<f64>, LvError> {
    if w.len() != model.d {
        return Err(LvError::DimensionMismatch { expected: model.d, got: w.len() });
    }
    Ok((0..model.d).map(|i| w[i] * model.growth_rate(w, i)).collect())
}

fn field_into(w: &[f64], dw: &mut [f64]) {
    // Same as `lv_field` with the structure of A written out.
    let d = w.len();
    for i in 0..d {
        let next = if i + 1 < d { w[i + 1] } else { 1.0 };
        let diag = if i == 0 { 2.0 * w[0] } else { w[0] + w[i] };
        dw[i] = w[i] * (next - diag);
    }
}

struct LvSystem {
    d: usize,
}

impl OdeSystem for LvSystem {
    fn dim(&self) -> usize {
        self.d
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        field_into(y, dy);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest accepted step; `f64::INFINITY` for none.
    pub max_step: f64,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
}

impl Default for LvConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_step: f64::INFINITY,
            initial_step: None,
        }
    }
}

impl LvConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rel_tol: tol,
            abs_tol: tol * 1e-3,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LVSample {
    pub t: f64,
    pub w: Vec<f64>,
    /// Trapezoid integral `∫₀ᵗ w` over the accepted steps.
    pub integral: Vec<f64>,
    /// Running estimate of the trapezoid error in `integral` (max over components).
    pub quadrature_error: f64,
    /// Running bound on the integration error accumulated in `ln w` (max over components).
    pub log_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LVTrajectory {
    pub d: usize,
    pub w0: Vec<f64>,
    pub config: LvConfig,
    pub samples: Vec<LVSample>,
}

impl LVTrajectory {
    pub fn last(&self) -> &LVSample {
        self.samples.last().expect("trajectory always contains t = 0")
    }

    /// `w̄(t) = (1/t)∫₀ᵗ w` at sample `k` (`w0` at `t = 0`).
    pub fn average(&self, k: usize) -> Vec<f64> {
        let s = &self.samples[k];
        if s.t == 0.0 {
            return s.w.clone();
        }
        s.integral.iter().map(|v| v / s.t).collect()
    }

    /// `ε_i(t) = (1/t) ln(w_i(t)/w_i(0))` at sample `k` (0 at `t = 0`).
    pub fn eps(&self, k: usize) -> Vec<f64> {
        let s = &self.samples[k];
        if s.t == 0.0 {
            return vec![0.0; self.d];
        }
        s.w.iter().zip(&self.w0).map(|(w, w0)| (w / w0).ln() / s.t).collect()
    }

    /// First sample index with `t ≥ at`.
    pub fn index_at(&self, at: f64) -> Option<usize> {
        let k = self.samples.partition_point(|s| s.t < at);
        (k < self.samples.len()).then_some(k)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.d {
            header.push_str(&format!(",w{i}"));
        }
        writeln!(w, "{header}")?;
        for s in &self.samples {
            writeln!(w, "{}", join_row(s.t, &s.w))?;
        }
        Ok(())
    }

    pub fn write_average_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.d {
            header.push_str(&format!(",avg{i}"));
        }
        writeln!(w, "{header}")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(w, "{}", join_row(s.t, &self.average(k)))?;
        }
        Ok(())
    }
}

fn join_row(t: f64, values: &[f64]) -> String {
    let mut line = crate::fmt17(t);
    for v in values {
        line.push(',');
        line.push_str(&crate::fmt17(*v));
    }
    line
}

/// `max(w_1, …, w_d, 1)`.
pub fn m_value(w: &[f64]) -> f64 {
    w.iter().cloned().fold(1.0, f64::max)
}

/// Simulates with default tolerances scaled from `tol`.
pub fn simulate(model: &LVModel, w0: &[f64], t_end: f64, tol: f64) -> Result<LVTrajectory, LvError> {
    simulate_with(model, w0, t_end, &LvConfig::with_tol(tol))
}

/// Adaptive integration to `t_end`. Steps that would leave the open positive
/// orthant are rejected and retried with a smaller step; the state is never
/// clipped.
pub fn simulate_with(model: &LVModel, w0: &[f64], t_end: f64, config: &LvConfig) -> Result<LVTrajectory, LvError> {
    let d = model.d;
    if w0.len() != d {
        return Err(LvError::DimensionMismatch { expected: d, got: w0.len() });
    }
    if let Some((index, &value)) = w0.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(LvError::NonPositiveInitial { index, value });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(LvError::InvalidConfig(format!("t_end = {t_end}")));
    }
    if !(config.rel_tol > 0.0 && config.abs_tol > 0.0 && config.max_step > 0.0) {
        return Err(LvError::InvalidConfig("tolerances and max_step must be positive".into()));
    }
    let tol = Tolerances { rel: config.rel_tol, abs: config.abs_tol };
    let mut stepper = DormandPrince::new(LvSystem { d }, 0.0, w0, tol);
    if let Some(h) = config.initial_step {
        stepper.set_step_size(h);
    }
    let mut samples = vec![LVSample {
        t: 0.0,
        w: w0.to_vec(),
        integral: vec![0.0; d],
        quadrature_error: 0.0,
        log_error: 0.0,
    }];
    let mut f_prev = stepper.dy().to_vec();
    let sqrt_d = (d as f64).sqrt();

    while stepper.t() < t_end {
        let cap = config.max_step.min(t_end - stepper.t());
        let acc = stepper
            .step(cap, |w| w.iter().all(|&v| v > 0.0))
            .map_err(|e| match e {
                StepError::Underflow { t, .. } | StepError::TooManyAttempts { t } => LvError::PositivityViolation { t },
            })?;
        let h = acc.h;
        let prev = samples.last().unwrap();
        let mut t = stepper.t();
        if (t - t_end).abs() <= 4.0 * f64::EPSILON * t_end {
            t = t_end;
        }
        let w = stepper.y().to_vec();
        let f_new = stepper.dy();

        let m_before = m_value(&prev.w);
        let m_after = m_value(&w);
        if m_after > m_before * (1.0 + 10.0 * config.rel_tol) + 10.0 * config.abs_tol {
            return Err(LvError::MonotonicityViolation { t, before: m_before, after: m_after });
        }

        let mut integral = prev.integral.clone();
        let mut quad = 0.0f64;
        let mut log_err = 0.0f64;
        for i in 0..d {
            integral[i] += 0.5 * h * (prev.w[i] + w[i]);
            // Euler–Maclaurin leading term of the trapezoid error.
            quad = quad.max(h * h / 12.0 * (f_new[i] - f_prev[i]).abs());
            let sc = config.abs_tol + config.rel_tol * prev.w[i].abs().max(w[i].abs());
            log_err = log_err.max(sqrt_d * acc.error * sc / w[i].min(prev.w[i]));
        }
        let sample = LVSample {
            t,
            w,
            integral,
            quadrature_error: prev.quadrature_error + quad,
            log_error: prev.log_error + log_err,
        };
        f_prev.copy_from_slice(f_new);
        samples.push(sample);
    }
    Ok(LVTrajectory {
        d,
        w0: w0.to_vec(),
        config: *config,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAverageReport {
    pub t: f64,
    /// `max_i |(A w̄ − b + ε)_i|`.
    pub defect: f64,
    /// `10·(‖A‖∞·quadrature error + accumulated log error)/t`.
    pub tolerance: f64,
    /// `max_i |w̄_i − w*_i|`.
    pub distance_to_star: f64,
}

impl TimeAverageReport {
    pub fn passes(&self) -> bool {
        self.defect <= self.tolerance
    }
}

/// Checks `A·w̄(t) = b − ε(t)` at sample `k`.
pub fn time_average_check_at(traj: &LVTrajectory, model: &LVModel, k: usize) -> TimeAverageReport {
    let s = &traj.samples[k];
    let avg = traj.average(k);
    let eps = traj.eps(k);
    let star = model.w_star_f64();
    let mut defect = 0.0f64;
    for i in 0..model.d {
        let lhs: f64 = (0..model.d).map(|j| model.a(i, j) as f64 * avg[j]).sum();
        defect = defect.max((lhs - model.b[i] as f64 + eps[i]).abs());
    }
    let tolerance = if s.t > 0.0 {
        10.0 * (model.a_norm_inf() * s.quadrature_error + s.log_error) / s.t
    } else {
        0.0
    };
    let distance_to_star = avg.iter().zip(&star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    TimeAverageReport {
        t: s.t,
        defect,
        tolerance,
        distance_to_star,
    }
}

/// The time-average identity at the final time.
pub fn time_average_check(traj: &LVTrajectory, model: &LVModel) -> TimeAverageReport {
    time_average_check_at(traj, model, traj.samples.len() - 1)
}

/// `(t, ‖w(t) − w*‖₂)` per sample.
pub fn distance_to_star(traj: &LVTrajectory, model: &LVModel) -> Vec<(f64, f64)> {
    let star = model.w_star_f64();
    traj.samples
        .iter()
        .map(|s| {
            let d2: f64 = s.w.iter().zip(&star).map(|(a, b)| (a - b) * (a - b)).sum();
            (s.t, d2.sqrt())
        })
        .collect()
}

/// `‖w − w*‖∞` at the last sample.
pub fn final_sup_distance(traj: &LVTrajectory, model: &LVModel) -> f64 {
    let star = model.w_star_f64();
    traj.last().w.iter().zip(&star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

pub fn write_distance_csv<W: Write>(dist: &[(f64, f64)], mut w: W) -> io::Result<()> {
    writeln!(w, "t,dist")?;
    for (t, v) in dist {
        writeln!(w, "{},{}", crate::fmt17(*t), crate::fmt17(*v))?;
    }
    Ok(())
}

/// `min_{i, t ≥ 1} w_i(t)`.
pub fn permanence_floor(traj: &LVTrajectory) -> Result<f64, LvError> {
    let t_end = traj.last().t;
    if t_end < 1.0 {
        return Err(LvError::TooShort { t_end, need: 1.0 });
    }
    Ok(traj
        .samples
        .iter()
        .filter(|s| s.t >= 1.0)
        .flat_map(|s| s.w.iter().copied())
        .fold(f64::INFINITY, f64::min))
}

/// `V(w) = Σ λ_i (w_i − w*_i − w*_i ln(w_i/w*_i))`.
pub fn lyapunov_value(w: &[f64], lambda: &[f64], star: &[f64]) -> f64 {
    w.iter()
        .zip(lambda)
        .zip(star)
        .map(|((&w, &l), &s)| {
            let r = (w - s) / s;
            l * s * (r - r.ln_1p())
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentReport {
    /// Smallest `V` over samples away from `w*`; must be positive.
    pub min_v_off_star: f64,
    /// `V` at the first sample.
    pub v_initial: f64,
    /// Max over interior samples of `|dV/dt (finite difference) + ½⟨δ, M δ⟩|`.
    pub max_identity_residual: f64,
    /// Largest increase of `V` between consecutive samples.
    pub max_increase: f64,
    /// Whether `M(λ)` is positive definite (smallest eigenvalue > 0).
    pub positive_definite: bool,
}

impl DescentReport {
    /// Non-increasing `V` up to `slack`, with `V > 0` off the equilibrium.
    pub fn descends(&self, slack: f64) -> bool {
        self.min_v_off_star >= 0.0 && self.max_increase <= slack
    }
}

/// Evaluates the Lyapunov function along a trajectory.
pub fn lyapunov_descent_check(traj: &LVTrajectory, lambda: &[f64], model: &LVModel) -> Result<DescentReport, LvError> {
    let d = model.d;
    if lambda.len() != d {
        return Err(LvError::DimensionMismatch { expected: d, got: lambda.len() });
    }
    let star = model.w_star_f64();
    let m = crate::lyapunov::build_matrix(lambda);
    let positive_definite = m.clone().symmetric_eigen().eigenvalues.min() > 0.0;
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let v: Vec<f64> = traj.samples.iter().map(|s| lyapunov_value(&s.w, lambda, &star)).collect();

    let mut min_v_off_star = f64::INFINITY;
    for (s, &val) in traj.samples.iter().zip(&v) {
        if s.w.iter().zip(&star).any(|(a, b)| a != b) {
            min_v_off_star = min_v_off_star.min(val);
        }
    }
    let mut max_identity_residual = 0.0f64;
    for j in 1..v.len().saturating_sub(1) {
        let delta = DVector::from_iterator(d, traj.samples[j].w.iter().zip(&star).map(|(a, b)| a - b));
        let rhs = -0.5 * delta.dot(&(&m * &delta));
        max_identity_residual = max_identity_residual.max((derivative3(&t, &v, j) - rhs).abs());
    }
    let max_increase = v.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(DescentReport {
        min_v_off_star,
        v_initial: v[0],
        max_identity_residual,
        max_increase,
        positive_definite,
    })
}

/// Stationary points on the boundary of the orthant and the sign of
/// `Ψ(w) = Σ_i (b_i − (A w)_i) = 1 − (d+1) w_1` there.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    /// The cascade `w_{i+1} = (i+1) w_1`, `(d+1) w_1 = 1` reproduces `w*` exactly.
    pub cascade_gives_star: bool,
    /// `Ψ` computed from `A` and `b` equals `1 − (d+1) w_1` as a linear form.
    pub psi_formula_exact: bool,
    /// Boundary stationary points listed exactly (`w_1 = 0`, each `w_i ∈ {0, w_{i+1}}`).
    pub enumerated: usize,
    /// All enumerated points satisfy `F = 0` exactly and have `Ψ = 1`.
    pub enumerated_ok: bool,
    /// Boundary stationary points found by randomized Newton on faces.
    pub newton_found: usize,
    /// Largest `|Ψ − 1|` over the Newton solutions.
    pub newton_max_psi_defect: f64,
    /// Every Newton solution on the boundary has `w_1 = 0` to rounding.
    pub newton_w1_zero: bool,
}

impl BoundaryReport {
    pub fn passes(&self) -> bool {
        self.cascade_gives_star && self.psi_formula_exact && self.enumerated_ok && self.newton_w1_zero && self.newton_max_psi_defect < 1e-9
    }
}

fn field_exact(model: &LVModel, w: &[Rational64]) -> Vec<Rational64> {
    (0..model.d)
        .map(|i| {
            let mut r = Rational64::from_integer(model.b[i]);
            for (j, wj) in w.iter().enumerate() {
                r -= Rational64::from_integer(model.a(i, j)) * wj;
            }
            w[i] * r
        })
        .collect()
}

/// Largest `d` for which boundary patterns are enumerated exhaustively.
const MAX_ENUMERATION_D: usize = 16;

pub fn boundary_psi_check(model: &LVModel, newton_trials: usize, seed: u64) -> BoundaryReport {
    let d = model.d;

    // Stationary with w1 = c > 0 forces w_i = i·c and then (d+1)c = 1.
    let c = Rational64::new(1, d as i64 + 1);
    let cascade: Vec<Rational64> = (1..=d as i64).map(|i| c * i).collect();
    let cascade_gives_star = cascade == model.w_star && field_exact(model, &cascade).iter().all(Zero::is_zero);

    // Ψ(w) = Σ b_i − Σ_j (Σ_i a_ij) w_j.
    let b_sum: i64 = model.b.iter().sum();
    let col_sums: Vec<i64> = (0..d).map(|j| (0..d).map(|i| model.a(i, j)).sum()).collect();
    let psi_formula_exact = b_sum == 1 && col_sums[0] == d as i64 + 1 && col_sums[1..].iter().all(|&c| c == 0);
    let psi = |w: &[f64]| b_sum as f64 - col_sums.iter().zip(w).map(|(c, w)| *c as f64 * w).sum::<f64>();

    // Exact list: each w_i (i ≥ 2) is 0 or equal to w_{i+1}, with w_{d+1} = 1.
    let mut enumerated = 0;
    let mut enumerated_ok = true;
    if d <= MAX_ENUMERATION_D {
        for mask in 0u32..(1 << (d - 1).min(31)) {
            let mut w = vec![Rational64::zero(); d];
            let mut next = Rational64::one();
            for i in (1..d).rev() {
                if mask & (1 << (i - 1)) != 0 {
                    w[i] = next;
                }
                next = w[i];
            }
            enumerated += 1;
            let stationary = field_exact(model, &w).iter().all(Zero::is_zero);
            let psi_exact = Rational64::from_integer(b_sum)
                - col_sums.iter().zip(&w).map(|(c, w)| Rational64::from_integer(*c) * w).sum::<Rational64>();
            enumerated_ok &= stationary && psi_exact.is_one();
        }
    }

    // Newton on random faces {w_i = 0, i ∈ Z}.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut newton_found = 0;
    let mut newton_max_psi_defect = 0.0f64;
    let mut newton_w1_zero = true;
    for _ in 0..newton_trials {
        let zero: Vec<bool> = loop {
            let z: Vec<bool> = (0..d).map(|_| rng.random_bool(0.5)).collect();
            if z.iter().any(|&b| b) {
                break z;
            }
        };
        let free: Vec<usize> = (0..d).filter(|&i| !zero[i]).collect();
        let mut w: Vec<f64> = (0..d).map(|i| if zero[i] { 0.0 } else { rng.random_range(0.0..1.5) }).collect();
        if let Some(sol) = newton_on_face(model, &mut w, &free) {
            if sol.iter().all(|&v| v >= -1e-12) {
                newton_found += 1;
                newton_max_psi_defect = newton_max_psi_defect.max((psi(&sol) - 1.0).abs());
                newton_w1_zero &= sol[0].abs() < 1e-12;
            }
        }
    }

    BoundaryReport {
        cascade_gives_star,
        psi_formula_exact,
        enumerated,
        enumerated_ok,
        newton_found,
        newton_max_psi_defect,
        newton_w1_zero,
    }
}

fn newton_on_face(model: &LVModel, w: &mut [f64], free: &[usize]) -> Option<Vec<f64>> {
    let k = free.len();
    if k == 0 {
        return lv_field(w, model).ok().filter(|f| f.iter().all(|v| v.abs() < 1e-12)).map(|_| w.to_vec());
    }
    // Boundary roots are often double (e.g. F_1 = -2 w_1² on w_2 = 0), where
    // Newton only converges linearly, so iterate until the step itself is tiny.
    for _ in 0..200 {
        let f = lv_field(w, model).ok()?;
        let jac = DMatrix::from_fn(k, k, |r, c| {
            let (i, j) = (free[r], free[c]);
            let diag = if i == j { model.growth_rate(w, i) } else { 0.0 };
            diag - w[i] * model.a(i, j) as f64
        });
        let rhs = DVector::from_iterator(k, free.iter().map(|&i| -f[i]));
        let step = jac.lu().solve(&rhs)?;
        for (r, &i) in free.iter().enumerate() {
            w[i] += step[r];
        }
        if w.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if step.amax() < 1e-15 {
            break;
        }
    }
    let f = lv_field(w, model).ok()?;
    f.iter().all(|v| v.abs() < 1e-12).then(|| w.to_vec())
}

/// Initial condition log-uniform on `[0.05, 2]^d`.
pub fn random_initial_condition<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let (lo, hi) = (0.05f64.ln(), 2.0f64.ln());
    (0..d).map(|_| rng.random_range(lo..hi).exp()).collect()
}

/// Initial condition for a single seed.
pub fn seeded_initial_condition(d: usize, seed: u64) -> Vec<f64> {
    random_initial_condition(d, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_layout() {
        let m = LVModel::new(4).unwrap();
        let want = [2, -1, 0, 0, 1, 1, -1, 0, 1, 0, 1, -1, 1, 0, 0, 1];
        assert_eq!(m.a, want);
        assert_eq!(m.b, vec![0, 0, 0, 1]);
        assert_eq!(LVModel::new(1).unwrap().a, vec![2]);
        assert_eq!(LVModel::new(0), Err(LvError::ZeroOrder));
    }

    #[test]
    fn stationary_point_exact_up_to_64() {
        for d in 1..=64 {
            assert!(LVModel::new(d).unwrap().verify_stationary(), "d = {d}");
        }
    }

    #[test]
    fn field_examples() {
        let m1 = LVModel::new(1).unwrap();
        assert_eq!(lv_field(&[1.0], &m1).unwrap(), vec![-1.0]);
        let m2 = LVModel::new(2).unwrap();
        let f = lv_field(&[1.0 / 3.0, 2.0 / 3.0], &m2).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-16));
        for d in 1..=12 {
            let m = LVModel::new(d).unwrap();
            let f = lv_field(&m.w_star_f64(), &m).unwrap();
            assert!(f.iter().all(|v| v.abs() < 1e-15));
        }
        assert!(matches!(lv_field(&[1.0], &m2), Err(LvError::DimensionMismatch { .. })));
    }

    #[test]
    fn structured_field_matches_generic() {
        let m = LVModel::new(5).unwrap();
        let w = [0.3, 1.2, 0.05, 0.7, 1.9];
        let mut fast = [0.0; 5];
        field_into(&w, &mut fast);
        let slow = lv_field(&w, &m).unwrap();
        for i in 0..5 {
            assert!((fast[i] - slow[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn logistic_d1() {
        let m = LVModel::new(1).unwrap();
        let traj = simulate(&m, &[0.1], 30.0, 1e-10).unwrap();
        for s in &traj.samples {
            // w' = w(1 - 2w): w(t) = 1/(2 + 8 e^{-t}).
            let exact = 1.0 / (2.0 + 8.0 * (-s.t).exp());
            assert!((s.w[0] - exact).abs() < 1e-8, "t={} {} vs {exact}", s.t, s.w[0]);
        }
        assert!((traj.last().w[0] - 0.5).abs() < 1e-10);
        assert_eq!(traj.last().t, 30.0);
    }

    #[test]
    fn stationary_start() {
        let m = LVModel::new(4).unwrap();
        let star = m.w_star_f64();
        let traj = simulate(&m, &star, 50.0, 1e-10).unwrap();
        let k = traj.samples.len() - 1;
        for (a, b) in traj.average(k).iter().zip(&star) {
            // Rounding in w* grows up to the tolerance once steps reach the stability limit.
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        assert!(traj.eps(k).iter().all(|e| e.abs() < 1e-9));
        assert!(distance_to_star(&traj, &m).iter().all(|(_, v)| *v < 1e-9));
        let floor = permanence_floor(&traj).unwrap();
        assert!((floor - 0.2).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_initial_data() {
        let m = LVModel::new(2).unwrap();
        assert!(matches!(simulate(&m, &[0.1, 0.0], 1.0, 1e-8), Err(LvError::NonPositiveInitial { index: 1, .. })));
        assert!(matches!(simulate(&m, &[0.1], 1.0, 1e-8), Err(LvError::DimensionMismatch { .. })));
    }

    #[test]
    fn time_average_identity_holds() {
        let m = LVModel::new(3).unwrap();
        let traj = simulate(&m, &[1.5, 0.1, 0.8], 200.0, 1e-10).unwrap();
        let r = time_average_check(&traj, &m);
        assert!(r.passes(), "{r:?}");
        assert!(r.defect < 1e-3);
    }

    #[test]
    fn boundary_check_small_d() {
        for d in [1, 2, 5, 11] {
            let m = LVModel::new(d).unwrap();
            let r = boundary_psi_check(&m, 50, 7);
            assert!(r.passes(), "d={d}: {r:?}");
            assert_eq!(r.enumerated, 1 << (d - 1));
        }
    }

    #[test]
    fn lyapunov_value_zero_at_star() {
        let m = LVModel::new(3).unwrap();
        let star = m.w_star_f64();
        assert_eq!(lyapunov_value(&star, &[1.0, 2.0, 3.0], &star), 0.0);
        assert!(lyapunov_value(&[0.3, 0.5, 0.9], &[1.0, 2.0, 3.0], &star) > 0.0);
    }

    #[test]
    fn descent_d2() {
        let m = LVModel::new(2).unwrap();
        let w0 = seeded_initial_condition(2, 3);
        let traj = simulate(&m, &w0, 30.0, 1e-11).unwrap();
        let r = lyapunov_descent_check(&traj, &[1.0, 1.0], &m).unwrap();
        assert!(r.positive_definite);
        assert!(r.descends(0.0), "{r:?}");
        assert!(r.min_v_off_star > 0.0);
    }

    #[test]
    fn descent_identity_is_second_order() {
        let m = LVModel::new(2).unwrap();
        let w0 = [1.5, 0.2];
        let run = |h: f64| {
            // Loose tolerance so that `max_step` fixes a uniform grid.
            let cfg = LvConfig { rel_tol: 1e-8, abs_tol: 1e-11, max_step: h, initial_step: Some(h) };
            let traj = simulate_with(&m, &w0, 10.0, &cfg).unwrap();
            lyapunov_descent_check(&traj, &[1.0, 1.0], &m).unwrap().max_identity_residual
        };
        let (coarse, fine) = (run(0.02), run(0.01));
        assert!(fine * 2.0 <= coarse, "{coarse:e} {fine:e}");
    }

    #[test]
    fn initial_conditions_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w = random_initial_condition(7, &mut rng);
            assert!(w.iter().all(|&v| (0.05..=2.0).contains(&v)));
        }
        assert_eq!(seeded_initial_condition(5, 9), seeded_initial_condition(5, 9));
    }

    #[test]
    fn csv_headers() {
        let m = LVModel::new(2).unwrap();
        let traj = simulate(&m, &[0.5, 0.5], 1.0, 1e-8).unwrap();
        let mut b = Vec::new();
        traj.write_csv(&mut b).unwrap();
        traj.write_average_csv(&mut b).unwrap();
        write_distance_csv(&distance_to_star(&traj, &m), &mut b).unwrap();
        let text = String::from_utf8(b).unwrap();
        assert!(text.starts_with("t,w1,w2\n"));
        assert!(text.contains("t,avg1,avg2\n"));
        assert!(text.contains("t,dist\n"));
    }
}
