//! Dormand–Prince 5(4) stepper with PI step-size control.
//!
//! The stepper only advances one accepted step at a time. Callers own the
//! outer loop so they can impose their own step caps (distance to a pole,
//! landing exactly on an output time) and admissibility predicates
//! (positivity of a Lotka–Volterra state) that reject a trial step without
//! ever modifying it.

use thiserror::Error;

/// Right-hand side of an autonomous or non-autonomous system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("step size underflow at t = {t}: h = {h:e} is below the minimum step")]
    Underflow { t: f64, h: f64 },
    #[error("maximum number of step attempts exceeded at t = {t}")]
    TooManyAttempts { t: f64 },
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const MAX_SHRINK: f64 = 5.0;
const MAX_GROW: f64 = 10.0;
const MAX_ATTEMPTS: usize = 200;

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct Accepted {
    pub h: f64,
    pub error: f64,
}

pub struct DormandPrince<S: OdeSystem> {
    sys: S,
    tol: Tolerances,
    t: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    y_new: Vec<f64>,
    y_stage: Vec<f64>,
    h: f64,
    err_prev: f64,
    pub h_min: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

impl<S: OdeSystem> DormandPrince<S> {
    pub fn new(sys: S, t0: f64, y0: &[f64], tol: Tolerances) -> Self {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "initial state has wrong dimension");
        let mut k: [Vec<f64>; 7] = Default::default();
        for ki in k.iter_mut() {
            *ki = vec![0.0; n];
        }
        let mut stepper = Self {
            sys,
            tol,
            t: t0,
            y: y0.to_vec(),
            k,
            y_new: vec![0.0; n],
            y_stage: vec![0.0; n],
            h: 0.0,
            err_prev: 1e-4,
            h_min: 0.0,
            accepted: 0,
            rejected: 0,
            evals: 0,
        };
        stepper.sys.rhs(t0, &stepper.y, &mut stepper.k[0]);
        stepper.evals += 1;
        stepper.h = stepper.initial_step();
        stepper.h_min = 1e-14 * t0.abs().max(1.0);
        stepper
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Derivative at the current point (first stage of the next step).
    pub fn dy(&self) -> &[f64] {
        &self.k[0]
    }

    pub fn system(&self) -> &S {
        &self.sys
    }

    pub fn next_step_size(&self) -> f64 {
        self.h
    }

    pub fn set_step_size(&mut self, h: f64) {
        self.h = h;
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.abs + self.tol.rel * a.abs().max(b.abs())
    }

    /// Hairer–Wanner starting step heuristic.
    fn initial_step(&mut self) -> f64 {
        let n = self.y.len();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..n {
            let sc = self.scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k[0][i] / sc).powi(2);
        }
        d0 = (d0 / n as f64).sqrt();
        d1 = (d1 / n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..n {
            self.y_stage[i] = self.y[i] + h0 * self.k[0][i];
        }
        self.sys.rhs(self.t + h0, &self.y_stage, &mut self.k[1]);
        self.evals += 1;
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.scale(self.y[i], self.y[i]);
            d2 += ((self.k[1][i] - self.k[0][i]) / sc).powi(2);
        }
        d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    /// Runs the seven stages for step `h`; fills `y_new` and returns the
    /// scaled RMS error estimate.
    fn attempt(&mut self, h: f64) -> f64 {
        let n = self.y.len();
        let t = self.t;
        let (k0, rest) = self.k.split_at_mut(1);
        let k1 = &k0[0];
        let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };

        for i in 0..n {
            self.y_stage[i] = self.y[i] + h * A21 * k1[i];
        }
        self.sys.rhs(t + C2 * h, &self.y_stage, k2);
        for i in 0..n {
            self.y_stage[i] = self.y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        self.sys.rhs(t + C3 * h, &self.y_stage, k3);
        for i in 0..n {
            self.y_stage[i] = self.y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        self.sys.rhs(t + C4 * h, &self.y_stage, k4);
        for i in 0..n {
            self.y_stage[i] =
                self.y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        self.sys.rhs(t + C5 * h, &self.y_stage, k5);
        for i in 0..n {
            self.y_stage[i] = self.y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        self.sys.rhs(t + h, &self.y_stage, k6);
        for i in 0..n {
            self.y_new[i] = self.y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        self.sys.rhs(t + h, &self.y_new, k7);
        self.evals += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.tol.abs + self.tol.rel * self.y[i].abs().max(self.y_new[i].abs());
            err += (e / sc).powi(2);
        }
        (err / n as f64).sqrt()
    }

    /// Advances by one accepted step of length at most `h_cap`.
    ///
    /// A trial whose end state fails `admissible` is rejected and retried
    /// with half the step, exactly like a step failing the error test.
    pub fn step<F>(&mut self, h_cap: f64, admissible: F) -> Result<Accepted, StepError>
    where
        F: Fn(&[f64]) -> bool,
    {
        let mut h = self.h.min(h_cap);
        for _ in 0..MAX_ATTEMPTS {
            if h < self.h_min.max(4.0 * f64::EPSILON * self.t.abs()) {
                return Err(StepError::Underflow { t: self.t, h });
            }
            let err = self.attempt(h);
            let finite = err.is_finite() && self.y_new.iter().all(|v| v.is_finite());
            if finite && err <= 1.0 {
                if !admissible(&self.y_new) {
                    self.rejected += 1;
                    h *= 0.5;
                    continue;
                }
                let fac11 = err.powf(EXPO1);
                let fac = (fac11 / self.err_prev.powf(BETA) / SAFETY).clamp(1.0 / MAX_GROW, MAX_SHRINK);
                let h_next = h / fac;
                self.err_prev = err.max(1e-4);
                self.t += h;
                std::mem::swap(&mut self.y, &mut self.y_new);
                let (first, rest) = self.k.split_at_mut(1);
                std::mem::swap(&mut first[0], &mut rest[5]);
                self.h = h_next;
                self.accepted += 1;
                return Ok(Accepted { h, error: err });
            }
            self.rejected += 1;
            let shrink = if finite {
                (err.powf(EXPO1) / SAFETY).min(MAX_SHRINK)
            } else {
                MAX_SHRINK
            };
            h /= shrink;
        }
        Err(StepError::TooManyAttempts { t: self.t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    fn run_to<S: OdeSystem>(s: &mut DormandPrince<S>, t_end: f64) {
        while s.t() < t_end {
            let cap = t_end - s.t();
            s.step(cap, |_| true).unwrap();
        }
    }

    #[test]
    fn exponential_decay() {
        let mut s = DormandPrince::new(Decay, 0.0, &[1.0], Tolerances { rel: 1e-10, abs: 1e-14 });
        run_to(&mut s, 5.0);
        assert!((s.t() - 5.0).abs() < 1e-14);
        assert!((s.y()[0] - (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn oscillator_full_period() {
        let tau = 2.0 * std::f64::consts::PI;
        let mut s = DormandPrince::new(Oscillator, 0.0, &[1.0, 0.0], Tolerances { rel: 1e-11, abs: 1e-13 });
        run_to(&mut s, tau);
        assert!((s.y()[0] - 1.0).abs() < 1e-9);
        assert!(s.y()[1].abs() < 1e-9);
    }

    #[test]
    fn error_shrinks_with_tolerance() {
        let err_at = |tol: f64| {
            let mut s = DormandPrince::new(Oscillator, 0.0, &[1.0, 0.0], Tolerances { rel: tol, abs: tol });
            run_to(&mut s, 10.0);
            (s.y()[0] - 10f64.cos()).abs()
        };
        let coarse = err_at(1e-6);
        let fine = err_at(1e-10);
        assert!(fine < coarse / 100.0, "coarse {coarse:e} fine {fine:e}");
    }

    #[test]
    fn inadmissible_states_are_never_accepted() {
        let mut s = DormandPrince::new(Decay, 0.0, &[1.0], Tolerances { rel: 1e-8, abs: 1e-12 });
        // Forbid leaving [0.5, 1]: steps must stop short of crossing y = 0.5.
        while s.y()[0] > 0.51 {
            match s.step(1.0, |y| y[0] >= 0.5) {
                Ok(_) => assert!(s.y()[0] >= 0.5),
                Err(StepError::Underflow { .. }) => break,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(s.y()[0] >= 0.5);
    }

    #[test]
    fn permanent_rejection_underflows() {
        let mut s = DormandPrince::new(Decay, 0.0, &[1.0], Tolerances { rel: 1e-8, abs: 1e-12 });
        let r = s.step(1.0, |_| false);
        assert!(matches!(r, Err(StepError::Underflow { .. }) | Err(StepError::TooManyAttempts { .. })));
    }
}
