//! Shared fixtures for the benchmarks.

use blowup_core::blowup::IntegratorConfig;
use blowup_core::burning::{sample_atoms, BurnWindow, IntensityProfile, PoissonAtom};
use blowup_core::lv::LVModel;

/// A burning window with its intensity profile up to `t_max`.
pub struct BurnFixture {
    pub window: BurnWindow,
    pub profile: IntensityProfile,
}

impl BurnFixture {
    pub fn new(d: usize, half_width: f64, t_max: f64) -> Self {
        let profile = IntensityProfile::compute(d, t_max, &IntegratorConfig::default()).expect("t_max before blow-up");
        let window = BurnWindow::new(d, half_width, t_max).expect("valid window");
        Self { window, profile }
    }

    pub fn atoms(&self, seed: u64) -> Vec<PoissonAtom> {
        sample_atoms(&self.window, &self.profile, seed).expect("moderate atom count")
    }
}

/// Model and the log-uniform initial state used by the LV benchmark.
pub fn lv_fixture(d: usize) -> (LVModel, Vec<f64>) {
    let model = LVModel::new(d).expect("d >= 1");
    let w0 = (0..d).map(|i| 0.05 * 40f64.powf((i as f64 + 0.5) / d as f64)).collect();
    (model, w0)
}
