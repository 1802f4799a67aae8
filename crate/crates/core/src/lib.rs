//! Numerical laboratory for the blow-up equation `y^(d+1) = y · y^(d)`.
//!
//! The crate integrates the equation toward its singularity, estimates the
//! blow-up time two independent ways, walks the time-change cascade down to
//! an autonomous Lotka–Volterra system, checks Lyapunov feasibility of that
//! system exactly, and simulates the associated Poissonian burning model.

pub mod acceptance;
pub mod blowup;
pub mod burning;
pub mod exact;
pub mod lv;
pub mod lyapunov;
pub mod rk;
pub mod series;
pub mod timechange;

pub use blowup::{
    analytic_d1, analytic_d1_from_gap, cauchy_field, estimate_blowup_shooting, integrate, integrate_to,
    BlowupError, BlowupEstimate, DerivativeJet, EstimateMethod, IntegratorConfig, Trajectory, T_D1,
};
pub use burning::{
    is_burned, mc_unburned_fraction, render_field, sample_atoms, unburned_probability_analytic, BurnError, BurnRaster, BurnWindow,
    IntensityProfile, McEstimate, PoissonAtom,
};
pub use lv::{simulate, LVModel, LVSample, LVTrajectory, LvConfig, LvError};
pub use lyapunov::{search_lambda, LyapunovCandidate, LyapunovError};
pub use series::{estimate_blowup_series, taylor_coefficients, SeriesCoefficients, SeriesError};
pub use timechange::{cascade, CascadeReport, TimechangeError, UTrajectory, VTrajectory, WTrajectory};

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
