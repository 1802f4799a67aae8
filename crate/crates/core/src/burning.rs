//! Poissonian burning with intensity `dx ⊗ y^(d)(t) dt`.
//!
//! Every atom `(x, s)` ignites at time `s` and its fire grows as an `ℓ¹` ball
//! of radius `(t - s)/2`. A point `z` is burned at time `t` iff some atom has
//! `s + 2‖x − z‖₁ ≤ t`. The probability that a fixed point is still unburned
//! is `exp(-x(t)) = 1/y^(d)(t)`.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::blowup::{integrate, integrate_to, BlowupError, BlowupEstimate, IntegratorConfig, Trajectory};

/// Largest expected atom count a single configuration may have.
pub const MAX_EXPECTED_ATOMS: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BurnError {
    #[error("order d must be at least 1")]
    ZeroOrder,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("t_max = {t_max} is at or past the blow-up time (estimate {t_blowup})")]
    PastBlowup { t_max: f64, t_blowup: f64 },
    #[error("t = {t} is outside the covered interval [0, {covered}]")]
    OutsideCoverage { t: f64, covered: f64 },
    #[error("dilation {dilation} is smaller than t/2 = {need}")]
    DilationTooSmall { dilation: f64, need: f64 },
    #[error("expected atom count {mean:e} exceeds {MAX_EXPECTED_ATOMS:e}")]
    TooManyAtoms { mean: f64 },
    #[error("rendering is only supported for d in {{1, 2}}, got {0}")]
    UnsupportedDimension(usize),
    #[error("probability {0} is not in (0, 1]")]
    InvalidProbability(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Blowup(#[from] BlowupError),
}

/// An ignition event.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonAtom {
    pub x: Vec<f64>,
    pub s: f64,
}

/// Observation window `[-R, R]^d` up to time `t_max`.
///
/// Atoms are drawn on `[-R - dilation, R + dilation]^d`; with
/// `dilation ≥ t_max/2` no fire that reaches the window by `t_max` is missed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurnWindow {
    pub d: usize,
    pub half_width: f64,
    pub t_max: f64,
    pub dilation: f64,
}

impl BurnWindow {
    pub fn new(d: usize, half_width: f64, t_max: f64) -> Result<Self, BurnError> {
        Self::with_dilation(d, half_width, t_max, 0.5 * t_max)
    }

    pub fn with_dilation(d: usize, half_width: f64, t_max: f64, dilation: f64) -> Result<Self, BurnError> {
        if d == 0 {
            return Err(BurnError::ZeroOrder);
        }
        if !(half_width >= 0.0 && half_width.is_finite()) {
            return Err(BurnError::InvalidWindow(format!("half_width = {half_width}")));
        }
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(BurnError::InvalidWindow(format!("t_max = {t_max}")));
        }
        if !(dilation >= 0.5 * t_max && dilation.is_finite()) {
            return Err(BurnError::DilationTooSmall { dilation, need: 0.5 * t_max });
        }
        Ok(Self { d, half_width, t_max, dilation })
    }

    /// Half side of the sampling box.
    pub fn sampling_half_width(&self) -> f64 {
        self.half_width + self.dilation
    }

    pub fn sampling_volume(&self) -> f64 {
        (2.0 * self.sampling_half_width()).powi(self.d as i32)
    }
}

/// `y^(d-1)` on `[0, t_max]`, the cumulative intensity in time, with the
/// companion `x = ∫ y` for the unburned probability.
///
/// Between grid points `y^(d-1)` is a cubic Hermite interpolant whose slopes
/// are the exact `y^(d)`, limited à la Fritsch–Carlson so that it stays
/// monotone and can be inverted.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityProfile {
    pub d: usize,
    t: Vec<f64>,
    cumulative: Vec<f64>,
    slope: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    top: Vec<f64>,
    y1: Vec<f64>,
}

impl IntensityProfile {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let d = traj.d;
        let n = traj.jets.len();
        let t: Vec<f64> = traj.jets.iter().map(|j| j.t).collect();
        let cumulative: Vec<f64> = traj.jets.iter().map(|j| j.jet[d - 1]).collect();
        let mut slope: Vec<f64> = traj.jets.iter().map(|j| j.jet[d]).collect();
        // Fritsch–Carlson limiter on each interval.
        for k in 0..n.saturating_sub(1) {
            let h = t[k + 1] - t[k];
            let delta = (cumulative[k + 1] - cumulative[k]) / h;
            if delta <= 0.0 {
                slope[k] = 0.0;
                slope[k + 1] = 0.0;
                continue;
            }
            let (a, b) = (slope[k] / delta, slope[k + 1] / delta);
            let r = a.hypot(b);
            if r > 3.0 {
                slope[k] *= 3.0 / r;
                slope[k + 1] *= 3.0 / r;
            }
        }
        Self {
            d,
            t,
            cumulative,
            slope,
            x: traj.jets.iter().map(|j| j.x).collect(),
            y: traj.jets.iter().map(|j| j.y()).collect(),
            top: traj.jets.iter().map(|j| j.jet[d]).collect(),
            y1: traj.jets.iter().map(|j| j.jet[1]).collect(),
        }
    }

    /// Integrates up to `t_max`, which must lie before the blow-up.
    pub fn compute(d: usize, t_max: f64, config: &IntegratorConfig) -> Result<Self, BurnError> {
        if d == 0 {
            return Err(BurnError::ZeroOrder);
        }
        match integrate_to(d, config, t_max) {
            Ok(traj) => Ok(Self::from_trajectory(&traj)),
            Err(BlowupError::PastBlowup { t_end, t_blowup }) => Err(BurnError::PastBlowup { t_max: t_end, t_blowup }),
            Err(e) => Err(e.into()),
        }
    }

    pub fn t_max(&self) -> f64 {
        *self.t.last().expect("profile is never empty")
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    fn check(&self, t: f64) -> Result<(), BurnError> {
        if !(0.0..=self.t_max()).contains(&t) {
            return Err(BurnError::OutsideCoverage { t, covered: self.t_max() });
        }
        Ok(())
    }

    fn interval(&self, t: f64) -> usize {
        let k = self.t.partition_point(|&v| v <= t);
        k.saturating_sub(1).min(self.t.len().saturating_sub(2))
    }

    fn hermite3(&self, k: usize, t: f64, f: &[f64], df: &[f64]) -> f64 {
        let h = self.t[k + 1] - self.t[k];
        let u = (t - self.t[k]) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * f[k] + (u3 - 2.0 * u2 + u) * h * df[k] + (-2.0 * u3 + 3.0 * u2) * f[k + 1] + (u3 - u2) * h * df[k + 1]
    }

    /// `y^(d-1)(t) = ∫₀ᵗ y^(d)`.
    pub fn cumulative(&self, t: f64) -> Result<f64, BurnError> {
        self.check(t)?;
        if self.t.len() == 1 {
            return Ok(self.cumulative[0]);
        }
        let k = self.interval(t);
        Ok(self.hermite3(k, t, &self.cumulative, &self.slope))
    }

    /// `x(t) = ∫₀ᵗ y`, cubic Hermite with `x' = y`.
    pub fn x(&self, t: f64) -> Result<f64, BurnError> {
        self.check(t)?;
        if self.t.len() == 1 {
            return Ok(self.x[0]);
        }
        let k = self.interval(t);
        Ok(self.hermite3(k, t, &self.x, &self.y))
    }

    /// Solves `y^(d-1)(t) = target` for `target ∈ [0, y^(d-1)(t_max)]`.
    pub fn invert(&self, target: f64) -> f64 {
        let n = self.t.len();
        if n == 1 || target <= self.cumulative[0] {
            return self.t[0];
        }
        if target >= self.cumulative[n - 1] {
            return self.t[n - 1];
        }
        let k = (self.cumulative.partition_point(|&v| v <= target) - 1).min(n - 2);
        let (mut lo, mut hi) = (self.t[k], self.t[k + 1]);
        let (f0, f1) = (self.cumulative[k], self.cumulative[k + 1]);
        let mut t = lo + (hi - lo) * (target - f0) / (f1 - f0);
        for _ in 0..100 {
            let g = self.hermite3(k, t, &self.cumulative, &self.slope) - target;
            if g == 0.0 {
                break;
            }
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
                break;
            }
            let h = self.t[k + 1] - self.t[k];
            let u = (t - self.t[k]) / h;
            let dg = (6.0 * u * u - 6.0 * u) / h * f0
                + (3.0 * u * u - 4.0 * u + 1.0) * self.slope[k]
                + (-6.0 * u * u + 6.0 * u) / h * f1
                + (3.0 * u * u - 2.0 * u) * self.slope[k + 1];
            let newton = t - g / dg;
            t = if dg > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        t
    }

    /// `x(t)` as `∫₀ᵗ (t−s)^d/d! · y^(d)(s) ds`, with `y^(d)` quintic Hermite
    /// on each step and 8-point Gauss–Legendre.
    pub fn convolution(&self, t: f64) -> Result<f64, BurnError> {
        self.check(t)?;
        let d = self.d as i32;
        let fact: f64 = (1..=self.d).map(|k| k as f64).product();
        let kernel = |s: f64| (t - s).powi(d) / fact;
        // g = y^(d), g' = y·y^(d), g'' = y^(d)·(y' + y²).
        let g = |k: usize| (self.top[k], self.y[k] * self.top[k], self.top[k] * (self.y1[k] + self.y[k] * self.y[k]));
        let mut total = 0.0;
        for k in 0..self.t.len().saturating_sub(1) {
            let (a, b) = (self.t[k], self.t[k + 1]);
            if a >= t {
                break;
            }
            let end = b.min(t);
            let h = b - a;
            let (g0, d0, s0) = g(k);
            let (g1, d1, s1) = g(k + 1);
            let quintic = |s: f64| {
                let u = (s - a) / h;
                let (u2, u3) = (u * u, u * u * u);
                let (u4, u5) = (u3 * u, u3 * u2);
                (1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5) * g0
                    + (u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5) * h * d0
                    + 0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5) * h * h * s0
                    + 0.5 * (u3 - 2.0 * u4 + u5) * h * h * s1
                    + (-4.0 * u3 + 7.0 * u4 - 3.0 * u5) * h * d1
                    + (10.0 * u3 - 15.0 * u4 + 6.0 * u5) * g1
            };
            let (mid, half) = (0.5 * (a + end), 0.5 * (end - a));
            total += half * GAUSS_LEGENDRE_8.iter().map(|&(xi, wi)| {
                let s = mid + half * xi;
                wi * kernel(s) * quintic(s)
            }).sum::<f64>();
        }
        Ok(total)
    }
}

const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Expected number of atoms in the sampling box up to time `t`.
pub fn expected_count(window: &BurnWindow, profile: &IntensityProfile, t: f64) -> Result<f64, BurnError> {
    Ok(window.sampling_volume() * profile.cumulative(t)?)
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64, BurnError> {
    if mean > MAX_EXPECTED_ATOMS {
        return Err(BurnError::TooManyAtoms { mean });
    }
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| BurnError::InvalidWindow(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

fn draw_atom<R: Rng + ?Sized>(window: &BurnWindow, profile: &IntensityProfile, top: f64, rng: &mut R) -> PoissonAtom {
    let l = window.sampling_half_width();
    let x = (0..window.d).map(|_| rng.random_range(-l..=l)).collect();
    let u: f64 = rng.random();
    PoissonAtom { x, s: profile.invert(u * top) }
}

/// Atoms on the dilated window with ignition times in `[0, t_end]`.
pub fn sample_atoms_until<R: Rng + ?Sized>(
    window: &BurnWindow,
    profile: &IntensityProfile,
    t_end: f64,
    rng: &mut R,
) -> Result<Vec<PoissonAtom>, BurnError> {
    if profile.d != window.d {
        return Err(BurnError::DimensionMismatch { expected: window.d, got: profile.d });
    }
    let top = profile.cumulative(t_end)?;
    let n = poisson_count(window.sampling_volume() * top, rng)?;
    Ok((0..n).map(|_| draw_atom(window, profile, top, rng)).collect())
}

/// One realisation of the process on the window, up to `t_max`.
pub fn sample_atoms(window: &BurnWindow, profile: &IntensityProfile, seed: u64) -> Result<Vec<PoissonAtom>, BurnError> {
    if window.t_max > profile.t_max() {
        return Err(BurnError::OutsideCoverage { t: window.t_max, covered: profile.t_max() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_atoms_until(window, profile, window.t_max, &mut rng)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum()
}

/// `z` lies in some ball `B₁(x, (t − s)/2)` with `s ≤ t`.
pub fn is_burned(z: &[f64], t: f64, atoms: &[PoissonAtom]) -> bool {
    atoms.iter().any(|a| a.s <= t && l1(&a.x, z) <= 0.5 * (t - a.s))
}

/// First burner of `z` and `min (s + 2‖x − z‖₁)`; `None` without atoms.
pub fn first_burn(z: &[f64], atoms: &[PoissonAtom]) -> Option<(usize, f64)> {
    atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (i, a.s + 2.0 * l1(&a.x, z)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// `P(z ∉ B(t)) = exp(-x(t)) = 1/y^(d)(t)`.
pub fn unburned_probability_analytic(profile: &IntensityProfile, t: f64) -> Result<f64, BurnError> {
    Ok((-profile.x(t)?).exp())
}

/// Same probability from `exp(-∫₀ᵗ (t−s)^d/d! · y^(d)(s) ds)`.
pub fn unburned_probability_convolution(profile: &IntensityProfile, t: f64) -> Result<f64, BurnError> {
    Ok((-profile.convolution(t)?).exp())
}

/// Time at which the unburned probability equals `p`, i.e. `x(t) = ln(1/p)`.
pub fn time_for_unburned_probability(d: usize, p: f64, config: &IntegratorConfig) -> Result<f64, BurnError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(BurnError::InvalidProbability(p));
    }
    let target = -p.ln();
    if target == 0.0 {
        return Ok(0.0);
    }
    let traj = integrate(d, config)?;
    let k = traj.jets.partition_point(|j| j.x < target);
    if k == 0 || k == traj.jets.len() {
        return Err(BurnError::InvalidProbability(p));
    }
    let (a, b) = (&traj.jets[k - 1], &traj.jets[k]);
    let mut t = a.t + (b.t - a.t) * (target - a.x) / (b.x - a.x);
    // Newton on x(t) - target with x' = y.
    for _ in 0..50 {
        let j = integrate_to(d, config, t)?;
        let last = j.last();
        let dt = (target - last.x) / last.y();
        t += dt;
        if dt.abs() <= 4.0 * f64::EPSILON * t {
            break;
        }
    }
    Ok(t)
}

/// Monte Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: usize,
    pub unburned: usize,
}

impl McEstimate {
    pub fn within(&self, value: f64, sigmas: f64) -> bool {
        (self.estimate - value).abs() <= sigmas * self.stderr
    }
}

/// Fraction of independent configurations in which the probe `z = 0` is
/// unburned at time `t`. Trial `i` uses stream `i` of the seeded generator,
/// so the result does not depend on the thread count.
pub fn mc_unburned_fraction(
    window: &BurnWindow,
    profile: &IntensityProfile,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<McEstimate, BurnError> {
    if window.dilation < 0.5 * t {
        return Err(BurnError::DilationTooSmall { dilation: window.dilation, need: 0.5 * t });
    }
    if profile.d != window.d {
        return Err(BurnError::DimensionMismatch { expected: window.d, got: profile.d });
    }
    let top = profile.cumulative(t)?;
    let mean = window.sampling_volume() * top;
    if mean > MAX_EXPECTED_ATOMS {
        return Err(BurnError::TooManyAtoms { mean });
    }
    let probe = vec![0.0; window.d];
    let outcomes: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let n = poisson_count(mean, &mut rng).expect("mean checked above");
            // Stop at the first atom that reaches the probe.
            !(0..n).any(|_| {
                let a = draw_atom(window, profile, top, &mut rng);
                l1(&a.x, &probe) <= 0.5 * (t - a.s)
            })
        })
        .collect();
    let unburned = outcomes.iter().filter(|&&u| u).count();
    let p = if trials > 0 { unburned as f64 / trials as f64 } else { f64::NAN };
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
        unburned,
    })
}

/// First-burner map of a window.
///
/// For `d = 1` the image is space-time: column `c` is the point
/// `z = -R + (c + 0.5)·2R/resolution` and row `r` the time
/// `t = (r + 0.5)·t_max/rows`. For `d = 2` it is a snapshot at `t_max`, row `r`
/// being the second coordinate with the same mapping as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BurnRaster {
    pub d: usize,
    pub resolution: usize,
    pub rows: usize,
    pub half_width: f64,
    pub t_max: f64,
    /// Per column for `d = 1`, per pixel (row-major) for `d = 2`.
    pub first_burner: Vec<Option<usize>>,
    pub first_time: Vec<f64>,
}

impl BurnRaster {
    pub fn coordinate(&self, index: usize) -> f64 {
        -self.half_width + (index as f64 + 0.5) * 2.0 * self.half_width / self.resolution as f64
    }

    pub fn row_time(&self, r: usize) -> f64 {
        (r as f64 + 0.5) * self.t_max / self.rows as f64
    }

    fn cell(&self, r: usize, c: usize) -> usize {
        if self.d == 1 {
            c
        } else {
            r * self.resolution + c
        }
    }

    /// First burner of pixel `(r, c)` if it is burned at that pixel's time.
    pub fn pixel(&self, r: usize, c: usize) -> Option<usize> {
        let k = self.cell(r, c);
        let t = if self.d == 1 { self.row_time(r) } else { self.t_max };
        if self.first_time[k] <= t {
            self.first_burner[k]
        } else {
            None
        }
    }

    /// Burned fraction of each row.
    pub fn burned_fraction_per_row(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| (0..self.resolution).filter(|&c| self.pixel(r, c).is_some()).count() as f64 / self.resolution as f64)
            .collect()
    }

    /// Binary PPM (P6); unburned pixels are white.
    pub fn write_ppm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.resolution, self.rows)?;
        let mut buf = Vec::with_capacity(3 * self.resolution * self.rows);
        for r in 0..self.rows {
            for c in 0..self.resolution {
                buf.extend_from_slice(&self.pixel(r, c).map_or([255, 255, 255], atom_color));
            }
        }
        w.write_all(&buf)
    }
}

/// Colour of atom `index`, from a splitmix64 hash, kept away from white.
pub fn atom_color(index: usize) -> [u8; 3] {
    let mut z = (index as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let b = z.to_le_bytes();
    [32 + b[0] % 192, 32 + b[1] % 192, 32 + b[2] % 192]
}

/// CSV legend `index,x0,...,s,r,g,b`.
pub fn write_legend<W: Write>(atoms: &[PoissonAtom], d: usize, mut w: W) -> io::Result<()> {
    let mut header = String::from("index");
    for i in 0..d {
        header.push_str(&format!(",x{i}"));
    }
    writeln!(w, "{header},s,r,g,b")?;
    for (i, a) in atoms.iter().enumerate() {
        let mut line = i.to_string();
        for v in &a.x {
            line.push(',');
            line.push_str(&crate::fmt17(*v));
        }
        let [r, g, b] = atom_color(i);
        writeln!(w, "{line},{},{r},{g},{b}", crate::fmt17(a.s))?;
    }
    Ok(())
}

fn first_burn_sorted(z: &[f64], atoms: &[PoissonAtom], order: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &i in order {
        let a = &atoms[i];
        if best.is_some_and(|(_, t)| a.s >= t) {
            break;
        }
        let t = a.s + 2.0 * l1(&a.x, z);
        if best.is_none_or(|(j, b)| t < b || (t == b && i < j)) {
            best = Some((i, t));
        }
    }
    best
}

pub fn render_field(window: &BurnWindow, atoms: &[PoissonAtom], resolution: usize) -> Result<BurnRaster, BurnError> {
    if !(1..=2).contains(&window.d) {
        return Err(BurnError::UnsupportedDimension(window.d));
    }
    if resolution == 0 {
        return Err(BurnError::InvalidWindow("resolution must be positive".into()));
    }
    if let Some(a) = atoms.iter().find(|a| a.x.len() != window.d) {
        return Err(BurnError::DimensionMismatch { expected: window.d, got: a.x.len() });
    }
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&i, &j| atoms[i].s.total_cmp(&atoms[j].s).then(i.cmp(&j)));
    let mut raster = BurnRaster {
        d: window.d,
        resolution,
        rows: resolution,
        half_width: window.half_width,
        t_max: window.t_max,
        first_burner: Vec::new(),
        first_time: Vec::new(),
    };
    let cells = if window.d == 1 { resolution } else { resolution * resolution };
    raster.first_burner.reserve(cells);
    raster.first_time.reserve(cells);
    for k in 0..cells {
        let z = if window.d == 1 {
            vec![raster.coordinate(k)]
        } else {
            vec![raster.coordinate(k % resolution), raster.coordinate(k / resolution)]
        };
        let hit = first_burn_sorted(&z, atoms, &order);
        raster.first_burner.push(hit.map(|h| h.0));
        raster.first_time.push(hit.map_or(f64::INFINITY, |h| h.1));
    }
    Ok(raster)
}

/// One row of the coverage table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRow {
    pub eps: f64,
    /// `x(T − ε)/ln(1/ε)`.
    pub analytic_exponent: f64,
    /// `ln p̂ / ln ε`; NaN when no trial stayed unburned.
    pub mc_estimate: f64,
    /// Delta-method standard error of `mc_estimate`.
    pub stderr: f64,
    pub mc: Option<McEstimate>,
}

/// Exponent of the unburned probability at `T − ε` for each `ε`.
///
/// The MC column uses a probe-sized window (`R = 0`, dilation `t/2`); pass
/// `trials = 0` to skip it.
pub fn coverage_rate_check(
    d: usize,
    estimate: &BlowupEstimate,
    eps_list: &[f64],
    trials: usize,
    seed: u64,
    config: &IntegratorConfig,
) -> Result<Vec<CoverageRow>, BurnError> {
    let mut rows = Vec::with_capacity(eps_list.len());
    for (k, &eps) in eps_list.iter().enumerate() {
        let t = estimate.t_blowup - eps;
        if !(eps > 0.0 && eps < 1.0 && t > 0.0) {
            return Err(BurnError::InvalidWindow(format!("eps = {eps}")));
        }
        let profile = IntensityProfile::compute(d, t, config)?;
        let x = profile.x(t)?;
        let log_inv = -eps.ln();
        let mut row = CoverageRow {
            eps,
            analytic_exponent: x / log_inv,
            mc_estimate: f64::NAN,
            stderr: f64::NAN,
            mc: None,
        };
        if trials > 0 {
            let window = BurnWindow::new(d, 0.0, t)?;
            let mc = mc_unburned_fraction(&window, &profile, t, trials, seed.wrapping_add(k as u64))?;
            if mc.unburned > 0 {
                row.mc_estimate = mc.estimate.ln() / eps.ln();
                row.stderr = mc.stderr / (mc.estimate * log_inv);
            }
            row.mc = Some(mc);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// CSV `eps,analytic_exponent,mc_estimate,stderr`.
pub fn write_coverage_csv<W: Write>(rows: &[CoverageRow], mut w: W) -> io::Result<()> {
    writeln!(w, "eps,analytic_exponent,mc_estimate,stderr")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            crate::fmt17(r.eps),
            crate::fmt17(r.analytic_exponent),
            crate::fmt17(r.mc_estimate),
            crate::fmt17(r.stderr)
        )?;
    }
    Ok(())
}
