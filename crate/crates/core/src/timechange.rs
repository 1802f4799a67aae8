//! The u → v → w cascade that turns the blow-up equation into an autonomous
//! Lotka–Volterra system, plus residual checks for each stage.
//!
//! * `u_0 = 1/((T-t)·y)`, `u_i = y^(i)/(y·y^(i-1))` on `(0, T)`;
//! * `v(s) = u(φ(s))` with `φ(s) = T(1 - e^{-(1+s)})`;
//! * `w(τ) = (v_1, …, v_d)(ψ(τ))` where `ψ⁻¹(s) = ∫₀ˢ dr / v_0(r)`.
//!
//! Derivatives are three-point finite differences on the sample grid and
//! integrals are trapezoid sums on the same grid, so every residual below is
//! second order in the grid spacing.

use std::f64::consts::E;
use std::io::{self, Write};

use thiserror::Error;

use crate::blowup::{analytic_d1_from_gap, BlowupEstimate, DerivativeJet, T_D1};

/// `v_0` below this value is treated as a permanence failure.
const V0_FLOOR: f64 = 1e-8;
/// The first `v` sample must lie at `s ≤` this value.
const MAX_START_S: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimechangeError {
    #[error("blow-up time {t_blowup} is not beyond the last sample time {t_max}")]
    InconsistentBlowup { t_blowup: f64, t_max: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("samples do not cover [t0, T): first sample has s = {s_first}")]
    InsufficientCoverage { s_first: f64 },
    #[error("v0 = {v0:e} at s = {s} is too close to zero")]
    VanishingV0 { s: f64, v0: f64 },
    #[error("u{index} = {value:e} is not positive at t = {t}")]
    NonPositive { t: f64, index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct USample {
    pub t: f64,
    pub u: Vec<f64>,
    /// `x(t) = ∫₀ᵗ y` carried over from the jet.
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UTrajectory {
    pub d: usize,
    pub t_blowup: f64,
    pub samples: Vec<USample>,
    /// `∂u_0/∂T = -u_0/(T-t)` per sample, the sensitivity to the blow-up estimate.
    pub du0_dt_blowup: Vec<f64>,
    /// `max_{i,t} u_i(t)`.
    pub bound: f64,
    /// Uncertainty of the blow-up estimate that produced `t_blowup`.
    pub t_uncertainty: f64,
}

impl UTrajectory {
    /// Largest `|∂u_0/∂T|·δT` over the samples.
    pub fn u0_uncertainty(&self) -> f64 {
        self.du0_dt_blowup.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * self.t_uncertainty
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w, "t", "u", 0..=self.d, None)?;
        for s in &self.samples {
            write_row(&mut w, s.t, &s.u, None)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VSample {
    pub s: f64,
    pub v: Vec<f64>,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VTrajectory {
    pub d: usize,
    pub t_blowup: f64,
    /// `φ(0) = (1 - 1/e)·T`.
    pub t0: f64,
    pub samples: Vec<VSample>,
}

impl VTrajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w, "s", "v", 0..=self.d, None)?;
        for s in &self.samples {
            write_row(&mut w, s.s, &s.v, None)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WSample {
    pub tau: f64,
    pub w: Vec<f64>,
    /// `ψ(τ)`, the `s` value this sample came from.
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WTrajectory {
    pub d: usize,
    pub samples: Vec<WSample>,
}

impl WTrajectory {
    /// `ψ(τ)` by linear interpolation.
    pub fn psi_at(&self, tau: f64) -> f64 {
        interp(self.samples.iter().map(|s| (s.tau, s.psi)), tau)
    }

    /// `ψ⁻¹(s)` by linear interpolation.
    pub fn psi_inverse_at(&self, s: f64) -> f64 {
        interp(self.samples.iter().map(|w| (w.psi, w.tau)), s)
    }

    /// `(1/τ)·∫₀^τ w_1` at the last sample.
    pub fn mean_growth(&self) -> f64 {
        let tau: Vec<f64> = self.samples.iter().map(|s| s.tau).collect();
        let w1: Vec<f64> = self.samples.iter().map(|s| s.w[0]).collect();
        let total = *cumulative_trapezoid(&tau, &w1).last().unwrap();
        total / tau.last().unwrap()
    }

    /// `ψ(τ)/τ` at the last sample.
    pub fn psi_ratio(&self) -> f64 {
        let last = self.samples.last().unwrap();
        last.psi / last.tau
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w, "tau", "w", 1..=self.d, Some("psi"))?;
        for s in &self.samples {
            write_row(&mut w, s.tau, &s.w, Some(s.psi))?;
        }
        Ok(())
    }
}

fn write_header<W: Write>(w: &mut W, first: &str, prefix: &str, range: std::ops::RangeInclusive<usize>, last: Option<&str>) -> io::Result<()> {
    let mut line = first.to_string();
    for i in range {
        line.push_str(&format!(",{prefix}{i}"));
    }
    if let Some(l) = last {
        line.push(',');
        line.push_str(l);
    }
    writeln!(w, "{line}")
}

fn write_row<W: Write>(w: &mut W, first: f64, values: &[f64], last: Option<f64>) -> io::Result<()> {
    let mut line = crate::fmt17(first);
    for v in values.iter().chain(last.iter()) {
        line.push(',');
        line.push_str(&crate::fmt17(*v));
    }
    writeln!(w, "{line}")
}

fn interp(points: impl Iterator<Item = (f64, f64)>, at: f64) -> f64 {
    let pts: Vec<(f64, f64)> = points.collect();
    let idx = pts.partition_point(|p| p.0 < at);
    if idx == 0 {
        return pts[0].1;
    }
    if idx == pts.len() {
        return pts[pts.len() - 1].1;
    }
    let (x0, y0) = pts[idx - 1];
    let (x1, y1) = pts[idx];
    y0 + (y1 - y0) * (at - x0) / (x1 - x0)
}

/// Three-point derivative at interior node `j` of a non-uniform grid.
pub fn derivative3(x: &[f64], f: &[f64], j: usize) -> f64 {
    let h1 = x[j] - x[j - 1];
    let h2 = x[j + 1] - x[j];
    // Written on differences so that constant data gives exactly zero.
    (h2 * (f[j] - f[j - 1]) / h1 + h1 * (f[j + 1] - f[j]) / h2) / (h1 + h2)
}

/// Running trapezoid integral, starting at 0.
pub fn cumulative_trapezoid(x: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..x.len() {
        acc += 0.5 * (x[j] - x[j - 1]) * (f[j] + f[j - 1]);
        out.push(acc);
    }
    out
}

/// `u` along an integrated trajectory; samples with `t ≤ 0` are skipped.
pub fn build_u(jets: &[DerivativeJet], estimate: &BlowupEstimate) -> Result<UTrajectory, TimechangeError> {
    let t_blowup = estimate.t_blowup;
    let t_max = jets.iter().map(|j| j.t).fold(f64::NEG_INFINITY, f64::max);
    if !(t_blowup > t_max) {
        return Err(TimechangeError::InconsistentBlowup { t_blowup, t_max });
    }
    let d = estimate.d;
    let mut samples = Vec::with_capacity(jets.len());
    let mut sens = Vec::with_capacity(jets.len());
    let mut bound: f64 = 0.0;
    for j in jets.iter().filter(|j| j.t > 0.0) {
        let y = j.jet[0];
        let gap = t_blowup - j.t;
        let mut u = Vec::with_capacity(d + 1);
        u.push(1.0 / (gap * y));
        for i in 1..=d {
            u.push(j.jet[i] / (y * j.jet[i - 1]));
        }
        for (index, &value) in u.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(TimechangeError::NonPositive { t: j.t, index, value });
            }
            bound = bound.max(value);
        }
        sens.push(-u[0] / gap);
        samples.push(USample { t: j.t, u, x: j.x });
    }
    Ok(UTrajectory {
        d,
        t_blowup,
        samples,
        du0_dt_blowup: sens,
        bound,
        t_uncertainty: estimate.uncertainty,
    })
}

/// Right-hand side of the autonomous form shared by the `v` and `w` systems:
/// `z_i (z_{i+1} - z_1 - z_i)` with `z_{d+1} = 1`, for `z = (z_1, …, z_d)`.
fn lv_rhs(z: &[f64], i: usize) -> f64 {
    let next = if i + 1 < z.len() { z[i + 1] } else { 1.0 };
    z[i] * (next - z[0] - z[i])
}

/// Max over interior samples of `|u_i' − rhs_i|·(T − t)`, per equation.
pub fn residual_system_u(u: &UTrajectory) -> Result<Vec<f64>, TimechangeError> {
    let n = u.samples.len();
    if n < 3 {
        return Err(TimechangeError::TooFewSamples { got: n, need: 3 });
    }
    let t: Vec<f64> = u.samples.iter().map(|s| s.t).collect();
    let mut out = vec![0.0; u.d + 1];
    for (i, slot) in out.iter_mut().enumerate() {
        let f: Vec<f64> = u.samples.iter().map(|s| s.u[i]).collect();
        for j in 1..n - 1 {
            let gap = u.t_blowup - t[j];
            let uj = &u.samples[j].u;
            let rhs = if i == 0 {
                uj[0] - uj[1]
            } else {
                lv_rhs(&uj[1..], i - 1) / uj[0]
            };
            let r = (derivative3(&t, &f, j) * gap - rhs).abs();
            *slot = f64::max(*slot, r);
        }
    }
    Ok(out)
}

/// Reparameterises by `s = φ⁻¹(t) = ln(T/(T-t)) - 1`, keeping `s ≥ 0`.
pub fn build_v(u: &UTrajectory) -> Result<VTrajectory, TimechangeError> {
    let t_blowup = u.t_blowup;
    let samples: Vec<VSample> = u
        .samples
        .iter()
        .map(|smp| VSample {
            s: (t_blowup / (t_blowup - smp.t)).ln() - 1.0,
            v: smp.u.clone(),
            x: smp.x,
        })
        .filter(|smp| smp.s >= 0.0)
        .collect();
    if samples.len() < 3 {
        return Err(TimechangeError::TooFewSamples { got: samples.len(), need: 3 });
    }
    if samples[0].s > MAX_START_S {
        return Err(TimechangeError::InsufficientCoverage { s_first: samples[0].s });
    }
    Ok(VTrajectory {
        d: u.d,
        t_blowup,
        t0: (1.0 - 1.0 / E) * t_blowup,
        samples,
    })
}

/// Max over interior samples of `|v_i' − rhs_i|`, per equation.
pub fn residual_system_v(v: &VTrajectory) -> Vec<f64> {
    let n = v.samples.len();
    let s: Vec<f64> = v.samples.iter().map(|p| p.s).collect();
    let mut out = vec![0.0; v.d + 1];
    for (i, slot) in out.iter_mut().enumerate() {
        let f: Vec<f64> = v.samples.iter().map(|p| p.v[i]).collect();
        for j in 1..n - 1 {
            let vj = &v.samples[j].v;
            let rhs = if i == 0 { vj[0] - vj[1] } else { lv_rhs(&vj[1..], i - 1) / vj[0] };
            *slot = f64::max(*slot, (derivative3(&s, &f, j) - rhs).abs());
        }
    }
    out
}

/// Defect of `v_0(s) = e^s ∫_s^∞ v_1(r) e^{-r} dr` on the sample grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V0IdentityReport {
    /// Max over samples of `|v_0 − e^s·(trapezoid + tail)|`.
    pub max_defect: f64,
    /// Value assumed for `v_1` beyond the last sample.
    pub tail_value: f64,
    /// `|v_1(s_last) − tail_value|`, a bound on the tail-truncation part of the defect.
    pub tail_bound: f64,
}

/// Checks the integral identity for `v_0`. The tail beyond the data uses
/// `v_1 ≡ 1/(d+1)` for `d ≤ 10` and the last sample of `v_1` otherwise.
pub fn identity_v0(v: &VTrajectory) -> V0IdentityReport {
    let n = v.samples.len();
    let last_v1 = v.samples[n - 1].v[1];
    let tail_value = if v.d <= 10 { 1.0 / (v.d as f64 + 1.0) } else { last_v1 };
    // I_j = ∫_{s_j}^∞ v_1(r) e^{s_j - r} dr, by backward recurrence with
    // v_1 linear between samples (exact for constant v_1).
    let mut integral = tail_value;
    let mut max_defect = (v.samples[n - 1].v[0] - integral).abs();
    for j in (0..n - 1).rev() {
        let h = v.samples[j + 1].s - v.samples[j].s;
        let decay = (-h).exp();
        let (a, b) = (v.samples[j].v[1], v.samples[j + 1].v[1]);
        integral = decay * integral - a * (-h).exp_m1() + (b - a) * linear_weight(h);
        max_defect = max_defect.max((v.samples[j].v[0] - integral).abs());
    }
    V0IdentityReport {
        max_defect,
        tail_value,
        tail_bound: (last_v1 - tail_value).abs(),
    }
}

/// `(1/h)∫₀ʰ r e^{-r} dr = (1 - e^{-h}(1+h))/h`.
fn linear_weight(h: f64) -> f64 {
    if h < 1e-2 {
        h * (0.5 - h * (1.0 / 3.0 - h * (1.0 / 8.0 - h * (1.0 / 30.0 - h / 144.0))))
    } else {
        (-(-h).exp_m1() - h * (-h).exp()) / h
    }
}

/// `w(τ)` with `τ = ψ⁻¹(s)` by trapezoid quadrature of `1/v_0`.
pub fn build_w(v: &VTrajectory) -> Result<WTrajectory, TimechangeError> {
    for p in &v.samples {
        if !(p.v[0] > V0_FLOOR) {
            return Err(TimechangeError::VanishingV0 { s: p.s, v0: p.v[0] });
        }
    }
    let s: Vec<f64> = v.samples.iter().map(|p| p.s).collect();
    let inv: Vec<f64> = v.samples.iter().map(|p| 1.0 / p.v[0]).collect();
    let tau = cumulative_trapezoid(&s, &inv);
    let samples = v
        .samples
        .iter()
        .zip(tau)
        .map(|(p, tau)| WSample {
            tau,
            w: p.v[1..].to_vec(),
            psi: p.s - v.samples[0].s,
        })
        .collect();
    Ok(WTrajectory { d: v.d, samples })
}

/// Max over interior samples of `|w_i' − w_i(w_{i+1} − w_1 − w_i)|`, per equation.
pub fn residual_system_w(w: &WTrajectory) -> Result<Vec<f64>, TimechangeError> {
    let n = w.samples.len();
    if n < 3 {
        return Err(TimechangeError::TooFewSamples { got: n, need: 3 });
    }
    let tau: Vec<f64> = w.samples.iter().map(|p| p.tau).collect();
    let mut out = vec![0.0; w.d];
    for (i, slot) in out.iter_mut().enumerate() {
        let f: Vec<f64> = w.samples.iter().map(|p| p.w[i]).collect();
        for j in 1..n - 1 {
            let r = (derivative3(&tau, &f, j) - lv_rhs(&w.samples[j].w, i)).abs();
            *slot = f64::max(*slot, r);
        }
    }
    Ok(out)
}

/// Chain rule of the second time change: max of `|dw_i/dτ − (dv_i/ds)·v_0|`.
pub fn residual_chain_rule(v: &VTrajectory, w: &WTrajectory) -> Vec<f64> {
    let n = v.samples.len().min(w.samples.len());
    let s: Vec<f64> = v.samples.iter().map(|p| p.s).collect();
    let tau: Vec<f64> = w.samples.iter().map(|p| p.tau).collect();
    let mut out = vec![0.0; v.d];
    for (i, slot) in out.iter_mut().enumerate() {
        let fv: Vec<f64> = v.samples.iter().map(|p| p.v[i + 1]).collect();
        let fw: Vec<f64> = w.samples.iter().map(|p| p.w[i]).collect();
        for j in 1..n - 1 {
            let lhs = derivative3(&tau, &fw, j);
            let rhs = derivative3(&s, &fv, j) * v.samples[j].v[0];
            *slot = f64::max(*slot, (lhs - rhs).abs());
        }
    }
    out
}

/// Max over samples of `|ψ(τ) − ∫₀^τ w_1 − ln(v_0(ψ(τ))/v_0(0))|`.
pub fn identity_psi(v: &VTrajectory, w: &WTrajectory) -> f64 {
    let tau: Vec<f64> = w.samples.iter().map(|p| p.tau).collect();
    let w1: Vec<f64> = w.samples.iter().map(|p| p.w[0]).collect();
    let int_w1 = cumulative_trapezoid(&tau, &w1);
    let v00 = v.samples[0].v[0];
    w.samples
        .iter()
        .zip(&v.samples)
        .zip(int_w1)
        .map(|((ws, vs), iw)| (ws.psi - iw - (vs.v[0] / v00).ln()).abs())
        .fold(0.0, f64::max)
}

/// Max over samples of `|(x(φ(s)) − x(φ(s_0))) − ψ⁻¹(s)|`: the integral of `y`
/// carried by the integrator against the quadrature of `1/v_0`.
pub fn round_trip_defect(v: &VTrajectory, w: &WTrajectory) -> f64 {
    let x0 = v.samples[0].x;
    v.samples
        .iter()
        .zip(&w.samples)
        .map(|(vs, ws)| ((vs.x - x0) - ws.tau).abs())
        .fold(0.0, f64::max)
}

/// Exact `d = 1` jets at `s` uniform on `[0, s_max]` (`n` intervals), built
/// from the gap `T − t = T·e^{-(1+s)}` to avoid cancellation near the pole.
pub fn d1_oracle_jets(s_max: f64, n: usize) -> Vec<DerivativeJet> {
    (0..=n)
        .map(|k| {
            let s = s_max * k as f64 / n as f64;
            let gap = T_D1 * (-(1.0 + s)).exp();
            analytic_d1_from_gap(gap).expect("gap inside the domain")
        })
        .collect()
}

/// Exact blow-up estimate for `d = 1`, for use with the oracle jets.
pub fn d1_exact_estimate() -> BlowupEstimate {
    BlowupEstimate {
        t_blowup: T_D1,
        method: crate::blowup::EstimateMethod::ShootingExtrapolation,
        uncertainty: 4.0 * f64::EPSILON * T_D1,
        d: 1,
    }
}

/// Every residual of the cascade on one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeReport {
    pub system_u: Vec<f64>,
    pub system_v: Vec<f64>,
    pub system_w: Vec<f64>,
    pub chain_rule: Vec<f64>,
    pub identity_v0: V0IdentityReport,
    pub identity_psi: f64,
    pub round_trip: f64,
    pub mean_growth: f64,
    pub psi_ratio: f64,
    pub u_bound: f64,
    pub u0_uncertainty: f64,
}

/// Jets from the last sample before `φ(0) = (1 − 1/e)·T` onward, where the
/// `v` and `w` time changes start and `u` stays bounded.
pub fn cascade_window(jets: &[DerivativeJet], t_blowup: f64) -> &[DerivativeJet] {
    let t0 = (1.0 - 1.0 / E) * t_blowup;
    let start = jets.partition_point(|j| j.t < t0).saturating_sub(1);
    &jets[start..]
}

pub fn cascade(jets: &[DerivativeJet], estimate: &BlowupEstimate) -> Result<(UTrajectory, VTrajectory, WTrajectory, CascadeReport), TimechangeError> {
    let u = build_u(jets, estimate)?;
    let v = build_v(&u)?;
    let w = build_w(&v)?;
    let report = CascadeReport {
        system_u: residual_system_u(&u)?,
        system_v: residual_system_v(&v),
        system_w: residual_system_w(&w)?,
        chain_rule: residual_chain_rule(&v, &w),
        identity_v0: identity_v0(&v),
        identity_psi: identity_psi(&v, &w),
        round_trip: round_trip_defect(&v, &w),
        mean_growth: w.mean_growth(),
        psi_ratio: w.psi_ratio(),
        u_bound: u.bound,
        u0_uncertainty: u.u0_uncertainty(),
    };
    Ok((u, v, w, report))
}
