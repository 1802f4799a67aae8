//! Taylor coefficients at 0 of `x = ∫ y`, which solves `x^(d+1) = e^x` with
//! flat initial data, and a Domb–Sykes estimate of their radius of
//! convergence (the blow-up time).
//!
//! The equation is invariant under `t ↦ ωt` for every `(d+1)`-th root of
//! unity `ω`, so `a[n] = 0` unless `(d+1) | n`. Ratios are therefore taken on
//! the subsequence `c[m] = a[m(d+1)]`, which is a series in `t^(d+1)` with
//! radius `T^(d+1)`.
//!
//! Coefficients are stored as `â[n] = a[n]·ρⁿ` to stay inside the double
//! range for large `N`.

use std::io::{self, Write};

use thiserror::Error;

use crate::blowup::{linear_fit, BlowupEstimate, EstimateMethod};

/// Minimum number of coefficients accepted by the radius estimator.
pub const MIN_COEFFS_FOR_ESTIMATE: usize = 64;
/// Coefficients used by the pilot pass that picks the scale `ρ`.
const PILOT_COEFFS: usize = 96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("order d must be at least 1")]
    ZeroOrder,
    #[error("N = {n} coefficients is too few, need at least {min}")]
    TooFewCoefficients { n: usize, min: usize },
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("ratio tail is not positive at m = {m} (N too small)")]
    NonPositiveRatio { m: usize },
    #[error("ratio tail is not monotone at m = {m} (N too small)")]
    NonMonotoneRatio { m: usize, estimate: BlowupEstimate },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients {
    pub d: usize,
    /// Scale `ρ`; stored coefficients are multiplied by `ρⁿ`.
    pub scale: f64,
    pub a_scaled: Vec<f64>,
    pub b_scaled: Vec<f64>,
}

impl SeriesCoefficients {
    pub fn len(&self) -> usize {
        self.a_scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_scaled.is_empty()
    }

    /// Unscaled `a[n]`; underflows to 0 for large `n` when `ρ` is large.
    pub fn a(&self, n: usize) -> f64 {
        unscale(self.a_scaled[n], self.scale, n)
    }

    /// Unscaled `b[n]`, the coefficients of `e^x`.
    pub fn b(&self, n: usize) -> f64 {
        unscale(self.b_scaled[n], self.scale, n)
    }

    /// `Σ a[n] tⁿ` over the stored coefficients.
    pub fn partial_sum(&self, t: f64) -> f64 {
        let z = t / self.scale;
        // Horner in the scaled variable.
        self.a_scaled.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    /// CSV with header `n,a_n,a_n_scaled`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,a_n,a_n_scaled")?;
        for n in 0..self.len() {
            writeln!(w, "{n},{},{}", crate::fmt17(self.a(n)), crate::fmt17(self.a_scaled[n]))?;
        }
        Ok(())
    }
}

fn unscale(v: f64, scale: f64, n: usize) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    (v.ln() - n as f64 * scale.ln()).exp()
}

/// Coefficients with an explicit scale `ρ`.
pub fn taylor_coefficients_scaled(d: usize, n: usize, scale: f64) -> Result<SeriesCoefficients, SeriesError> {
    if d == 0 {
        return Err(SeriesError::ZeroOrder);
    }
    if n < d + 2 {
        return Err(SeriesError::TooFewCoefficients { n, min: d + 2 });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(SeriesError::BadScale(scale));
    }
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let rho_pow = scale.powi(d as i32 + 1);
    // k·â[k], cached for the convolution.
    let mut ka = vec![0.0; n];
    b[0] = 1.0;
    for m in 0..n {
        if m > 0 {
            let mut s = 0.0;
            for k in (d + 1)..=m {
                s += ka[k] * b[m - k];
            }
            b[m] = s / m as f64;
        }
        let target = m + d + 1;
        if target < n {
            // n!/(n+d+1)! as a product of reciprocals.
            let mut f = rho_pow;
            for j in (m + 1)..=target {
                f /= j as f64;
            }
            a[target] = b[m] * f;
            ka[target] = target as f64 * a[target];
        }
    }
    Ok(SeriesCoefficients {
        d,
        scale,
        a_scaled: a,
        b_scaled: b,
    })
}

/// Coefficients `a[0..N]` of `x` and `b[0..N]` of `e^x`, scaled by an
/// automatically chosen `ρ` close to the radius.
pub fn taylor_coefficients(d: usize, n: usize) -> Result<SeriesCoefficients, SeriesError> {
    if d == 0 {
        return Err(SeriesError::ZeroOrder);
    }
    if n < d + 2 {
        return Err(SeriesError::TooFewCoefficients { n, min: d + 2 });
    }
    let pilot_len = PILOT_COEFFS.max(4 * (d + 1) + 2);
    let pilot = taylor_coefficients_scaled(d, pilot_len, 1.0)?;
    let scale = match fit_radius(&pilot, 2) {
        Ok(fit) if fit.t.is_finite() && fit.t > 0.0 => fit.t,
        _ => 1.0,
    };
    taylor_coefficients_scaled(d, n, scale)
}

struct RadiusFit {
    t: f64,
    /// Standard error of `t` propagated from the intercept.
    se: f64,
}

/// Domb–Sykes fit on the last `1/fraction` of the ratios `c[m]/c[m-1]`.
fn fit_radius(coeffs: &SeriesCoefficients, fraction: usize) -> Result<RadiusFit, SeriesError> {
    let d1 = coeffs.d + 1;
    let c: Vec<f64> = coeffs.a_scaled.iter().step_by(d1).copied().collect();
    // c[0] = a[0] = 0, so ratios start at m = 2.
    let m_max = c.len() - 1;
    let first = (m_max - (m_max - 1) / fraction).max(2);
    let mut inv_m = Vec::new();
    let mut ratio = Vec::new();
    let mut weight = Vec::new();
    for m in first..=m_max {
        if !(c[m] > 0.0 && c[m - 1] > 0.0) {
            return Err(SeriesError::NonPositiveRatio { m });
        }
        inv_m.push(1.0 / m as f64);
        ratio.push(c[m] / c[m - 1]);
        weight.push((m * m) as f64);
    }
    if ratio.len() < 2 {
        return Err(SeriesError::NonPositiveRatio { m: m_max });
    }
    let (intercept, slope) = linear_fit(&inv_m, &ratio, Some(&weight));
    if !(intercept > 0.0) {
        return Err(SeriesError::NonPositiveRatio { m: m_max });
    }
    let k = ratio.len() as f64;
    let (mut sw, mut swu, mut swuu, mut sres) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..ratio.len() {
        let r = ratio[i] - intercept - slope * inv_m[i];
        sw += weight[i];
        swu += weight[i] * inv_m[i];
        swuu += weight[i] * inv_m[i] * inv_m[i];
        sres += weight[i] * r * r;
    }
    let sigma2 = if k > 2.0 { sres / (k - 2.0) } else { 0.0 };
    let det = sw * swuu - swu * swu;
    let var_intercept = if det > 0.0 { sigma2 * swuu / det } else { 0.0 };
    let e = 1.0 / d1 as f64;
    let t = coeffs.scale * intercept.powf(-e);
    // dT/dI = -T/((d+1) I)
    let se = var_intercept.sqrt() * t * e / intercept;
    Ok(RadiusFit { t, se })
}

/// First `m` in the last half of the ratio tail where the ratios decrease.
fn check_tail(coeffs: &SeriesCoefficients) -> Result<Option<usize>, SeriesError> {
    let d1 = coeffs.d + 1;
    let c: Vec<f64> = coeffs.a_scaled.iter().step_by(d1).copied().collect();
    let m_max = c.len() - 1;
    let first = (m_max - (m_max - 1) / 2).max(2);
    let mut prev = f64::NEG_INFINITY;
    for m in first..=m_max {
        if !(c[m] > 0.0 && c[m - 1] > 0.0) {
            return Err(SeriesError::NonPositiveRatio { m });
        }
        let r = c[m] / c[m - 1];
        // Ratios approach the limit from below; allow rounding-level noise.
        if r < prev * (1.0 - 64.0 * f64::EPSILON) {
            return Ok(Some(m));
        }
        prev = r;
    }
    Ok(None)
}

/// Radius of convergence of the series of `x` by Domb–Sykes extrapolation.
///
/// A ratio tail that is not monotone is reported as an error carrying the
/// fitted estimate; this happens for `d ≥ 6`, where the subleading singular
/// behaviour oscillates.
///
/// Uncertainty is the largest of the regression standard error, a tail bound
/// from the shift between fits on the last half and the last quarter of the
/// ratios, and a rounding floor. The residual bias left by the linear fit
/// decays at least like `1/m`, and the quarter window starts `3/2` further
/// out, so the half-window bias is at most `3·|shift|`.
pub fn estimate_blowup_series(coeffs: &SeriesCoefficients) -> Result<BlowupEstimate, SeriesError> {
    if coeffs.len() < MIN_COEFFS_FOR_ESTIMATE {
        return Err(SeriesError::TooFewCoefficients {
            n: coeffs.len(),
            min: MIN_COEFFS_FOR_ESTIMATE,
        });
    }
    let decreasing_at = check_tail(coeffs)?;
    let half = fit_radius(coeffs, 2)?;
    let quarter = fit_radius(coeffs, 4)?;
    let uncertainty = half.se.max(3.0 * (half.t - quarter.t).abs()).max(4.0 * f64::EPSILON * half.t);
    let estimate = BlowupEstimate {
        t_blowup: half.t,
        method: EstimateMethod::SeriesRadius,
        uncertainty,
        d: coeffs.d,
    };
    match decreasing_at {
        Some(m) => Err(SeriesError::NonMonotoneRatio { m, estimate }),
        None => Ok(estimate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::T_D1;

    /// Taylor coefficients of `-2 ln cos(t/√2)`, from `ln cos z = -Σ 2^{2k-1}(2^{2k}-1)|B_{2k}| z^{2k}/(k(2k)!)`.
    fn d1_exact(n: usize) -> f64 {
        // Bernoulli numbers B2..B8 as exact fractions.
        let b = [1.0 / 6.0, 1.0 / 30.0, 1.0 / 42.0, 1.0 / 30.0];
        if n % 2 == 1 || n == 0 {
            return 0.0;
        }
        let k = n / 2;
        let two_k = 2f64.powi(2 * k as i32);
        let fact: f64 = (1..=n).map(|j| j as f64).product();
        let lncos = two_k / 2.0 * (two_k - 1.0) * b[k - 1] / (k as f64 * fact);
        // z = t/√2 contributes 2^{-k}.
        2.0 * lncos / 2f64.powi(k as i32)
    }

    #[test]
    fn d1_low_order_coefficients() {
        let c = taylor_coefficients(1, 16).unwrap();
        assert!((c.a(2) - 0.5).abs() < 1e-15);
        assert_eq!(c.a(3), 0.0);
        assert!((c.a(4) - 1.0 / 24.0).abs() < 1e-15);
        for n in 0..=8 {
            let want = d1_exact(n);
            assert!((c.a(n) - want).abs() <= 1e-14 * want.abs().max(1e-300), "n={n}: {} vs {want}", c.a(n));
        }
    }

    #[test]
    fn leading_coefficient() {
        for d in 1..=12 {
            let c = taylor_coefficients(d, d + 2).unwrap();
            let fact: f64 = (1..=d + 1).map(|j| j as f64).product();
            for n in 0..=d {
                assert_eq!(c.a_scaled[n], 0.0);
            }
            assert!((c.a(d + 1) * fact - 1.0).abs() < 1e-13);
            assert_eq!(c.b_scaled[0], 1.0);
        }
    }

    #[test]
    fn scale_does_not_change_coefficients() {
        let c1 = taylor_coefficients_scaled(2, 60, 1.0).unwrap();
        let c3 = taylor_coefficients_scaled(2, 60, 3.0).unwrap();
        for n in 0..60 {
            let (x, y) = (c1.a(n), c3.a(n));
            assert!((x - y).abs() <= 1e-12 * x.abs(), "n={n}");
        }
    }

    #[test]
    fn errors() {
        assert_eq!(taylor_coefficients(0, 10), Err(SeriesError::ZeroOrder));
        assert_eq!(taylor_coefficients(3, 4), Err(SeriesError::TooFewCoefficients { n: 4, min: 5 }));
        let c = taylor_coefficients(1, 32).unwrap();
        assert!(matches!(estimate_blowup_series(&c), Err(SeriesError::TooFewCoefficients { .. })));
        assert!(matches!(taylor_coefficients_scaled(1, 8, -1.0), Err(SeriesError::BadScale(_))));
    }

    #[test]
    fn d1_radius() {
        let c = taylor_coefficients(1, 256).unwrap();
        let est = estimate_blowup_series(&c).unwrap();
        assert!((est.t_blowup - T_D1).abs() < 1e-6, "{est:?}");
        assert!(est.contains(T_D1) || (est.t_blowup - T_D1).abs() < 1e-12);
        assert_eq!(est.method, EstimateMethod::SeriesRadius);
    }

    #[test]
    fn uncertainty_shrinks_with_n() {
        let unc: Vec<f64> = [64, 256, 1024]
            .iter()
            .map(|&n| estimate_blowup_series(&taylor_coefficients(2, n).unwrap()).unwrap().uncertainty)
            .collect();
        assert!(unc[0] > unc[1] && unc[1] > unc[2], "{unc:?}");
    }

    #[test]
    fn large_n_stays_finite() {
        for d in [1, 5, 11] {
            let c = taylor_coefficients(d, 4096).unwrap();
            assert!(c.a_scaled.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!(c.a_scaled[4095 - 4095 % (d + 1)] > 0.0);
        }
    }

    #[test]
    fn csv_dump() {
        let c = taylor_coefficients(1, 8).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("n,a_n,a_n_scaled"));
        assert_eq!(text.lines().count(), 9);
    }
}
