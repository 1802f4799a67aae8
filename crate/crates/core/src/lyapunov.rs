//! Diagonal Lyapunov functions for the Lotka–Volterra system: the matrix
//! `M(λ) = DA + (DA)ᵀ` with `D = diag(λ)`, exact and floating-point
//! positive-definiteness tests, and a search for `λ` maximising the smallest
//! eigenvalue of `M(λ)` on the simplex.

use std::fmt::Write as _;
use std::ops::{Add, Neg, Sub};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::exact::{self, IntMatrix};

/// Weights for `d = 10` under which all ten leading minors are positive.
pub const PUBLISHED_LAMBDA: [i64; 10] = [1024, 227, 118, 92, 89, 97, 116, 153, 232, 481];

/// Leading minors of `M(PUBLISHED_LAMBDA)`.
pub const PUBLISHED_MINORS: [&str; 10] = [
    "4096",
    "1224375",
    "114265104",
    "6270814340",
    "280372975336",
    "12330415584972",
    "687248010753336",
    "69483419810465760",
    "12807765625815100744",
    "136953089422286895648",
];

/// `min_eig` above this value counts as feasible.
pub const FEASIBILITY_THRESHOLD: f64 = 1e-8;
/// Search output is rounded to integers over this denominator.
pub const RATIONAL_DENOMINATOR: f64 = 1e6;
/// Interior floor applied after each simplex projection.
const LAMBDA_FLOOR: f64 = 1e-6;
/// Eigenvalues this close to the minimum are treated as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("lambda must be non-empty")]
    Empty,
    #[error("lambda[{index}] = {value} is not positive")]
    NonPositive { index: usize, value: String },
}

/// `M(λ)` over any ring-like scalar: `M11 = 4λ1`, `M12 = λ2 − λ1`,
/// `M1j = λj` for `j ≥ 3`, `Mii = 2λi` and `M(i,i+1) = −λi` for `i ≥ 2`.
pub fn build_matrix_generic<T>(lambda: &[T]) -> Vec<Vec<T>>
where
    T: Clone + Zero + Add<Output = T> + Sub<Output = T> + Neg<Output = T>,
{
    let d = lambda.len();
    let mut m = vec![vec![T::zero(); d]; d];
    let two = |x: &T| x.clone() + x.clone();
    if d == 0 {
        return m;
    }
    m[0][0] = two(&two(&lambda[0]));
    for j in 1..d {
        let v = if j == 1 { lambda[1].clone() - lambda[0].clone() } else { lambda[j].clone() };
        m[0][j] = v.clone();
        m[j][0] = v;
    }
    for i in 1..d {
        m[i][i] = two(&lambda[i]);
        if i + 1 < d {
            m[i][i + 1] = -lambda[i].clone();
            m[i + 1][i] = -lambda[i].clone();
        }
    }
    m
}

pub fn build_matrix(lambda: &[f64]) -> DMatrix<f64> {
    let rows = build_matrix_generic(lambda);
    DMatrix::from_fn(lambda.len(), lambda.len(), |i, j| rows[i][j])
}

pub fn build_matrix_exact(lambda: &[BigInt]) -> IntMatrix {
    build_matrix_generic(lambda)
}

fn check_positive<T: Signed + ToString>(lambda: &[T]) -> Result<(), LyapunovError> {
    if lambda.is_empty() {
        return Err(LyapunovError::Empty);
    }
    match lambda.iter().enumerate().find(|(_, v)| !v.is_positive()) {
        Some((index, v)) => Err(LyapunovError::NonPositive { index, value: v.to_string() }),
        None => Ok(()),
    }
}

/// Exact `Δ_1, …, Δ_d` of `M(λ)` for integer `λ`.
pub fn leading_minors_exact(lambda: &[BigInt]) -> Result<Vec<BigInt>, LyapunovError> {
    check_positive(lambda)?;
    Ok(exact::leading_minors(&build_matrix_exact(lambda)))
}

pub fn published_lambda() -> Vec<BigInt> {
    PUBLISHED_LAMBDA.iter().map(|&v| BigInt::from(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdMode {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdVerdict {
    PositiveDefinite,
    NotPositiveDefinite,
    /// The smallest pivot is inside the tolerance band `10⁻¹⁰·‖M‖`.
    Indeterminate,
}

impl PdVerdict {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Self::PositiveDefinite => Some(true),
            Self::NotPositiveDefinite => Some(false),
            Self::Indeterminate => None,
        }
    }
}

/// Exact mode converts every entry to its exact binary rational value and
/// applies Sylvester's criterion; float mode runs an `LDLᵀ` factorisation.
pub fn is_positive_definite(m: &DMatrix<f64>, mode: PdMode) -> PdVerdict {
    match mode {
        PdMode::Exact => {
            if exact::is_positive_definite(&to_integer_matrix(m)) {
                PdVerdict::PositiveDefinite
            } else {
                PdVerdict::NotPositiveDefinite
            }
        }
        PdMode::Float => ldlt_verdict(m),
    }
}

/// Scales a float matrix by a power of two so that all entries are integers.
fn to_integer_matrix(m: &DMatrix<f64>) -> IntMatrix {
    let entries: Vec<BigRational> = m.iter().map(|&v| BigRational::from_float(v).expect("finite entries")).collect();
    let scale = entries.iter().map(|r| r.denom().clone()).max().unwrap_or_else(|| BigInt::from(1));
    let (r, c) = m.shape();
    (0..r)
        .map(|i| (0..c).map(|j| (entries[j * r + i].clone() * BigRational::from_integer(scale.clone())).to_integer()).collect())
        .collect()
}

fn ldlt_verdict(m: &DMatrix<f64>) -> PdVerdict {
    let n = m.nrows();
    let norm = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let band = 1e-10 * norm;
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut diag = vec![0.0; n];
    let mut indeterminate = false;
    for j in 0..n {
        let mut dj = m[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * diag[k];
        }
        if dj < -band {
            return PdVerdict::NotPositiveDefinite;
        }
        if dj.abs() <= band {
            indeterminate = true;
            dj = if dj == 0.0 { band.max(f64::MIN_POSITIVE) } else { dj };
        }
        diag[j] = dj;
        l[(j, j)] = 1.0;
        for i in j + 1..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * diag[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    if indeterminate {
        PdVerdict::Indeterminate
    } else {
        PdVerdict::PositiveDefinite
    }
}

/// Smallest eigenvalue of `M(λ / Σλ)`.
pub fn min_eig_normalized(lambda: &[f64]) -> f64 {
    let sum: f64 = lambda.iter().sum();
    let scaled: Vec<f64> = lambda.iter().map(|v| v / sum).collect();
    build_matrix(&scaled).symmetric_eigen().eigenvalues.min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCandidate {
    pub d: usize,
    /// Weights normalised to sum 1.
    pub lambda: Vec<f64>,
    /// `round(λ·10⁶)`, floored at 1.
    pub lambda_int: Vec<BigInt>,
    /// Exact leading minors of `M(lambda_int)`.
    pub minors: Vec<BigInt>,
    /// Smallest eigenvalue of `M(lambda)`.
    pub min_eig: f64,
    /// `min_eig > 10⁻⁸`.
    pub feasible: bool,
    /// All exact minors of the rationalised weights are positive.
    pub exact_positive_definite: bool,
}

impl LyapunovCandidate {
    pub fn from_weights(lambda: &[f64]) -> Self {
        let sum: f64 = lambda.iter().sum();
        let lambda: Vec<f64> = lambda.iter().map(|v| v / sum).collect();
        let lambda_int: Vec<BigInt> = lambda.iter().map(|v| BigInt::from(((v * RATIONAL_DENOMINATOR).round() as i64).max(1))).collect();
        let minors = exact::leading_minors(&build_matrix_exact(&lambda_int));
        let exact_positive_definite = minors.iter().all(|m| m.is_positive());
        let min_eig = min_eig_normalized(&lambda);
        Self {
            d: lambda.len(),
            lambda,
            lambda_int,
            minors,
            min_eig,
            feasible: min_eig > FEASIBILITY_THRESHOLD,
            exact_positive_definite,
        }
    }

    /// Structured text report.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "d = {}", self.d);
        let _ = writeln!(out, "feasible = {}", self.feasible);
        let _ = writeln!(out, "min_eig = {}", crate::fmt17(self.min_eig));
        let _ = writeln!(out, "exact_positive_definite = {}", self.exact_positive_definite);
        let lambda: Vec<String> = self.lambda.iter().map(|v| crate::fmt17(*v)).collect();
        let _ = writeln!(out, "lambda = [{}]", lambda.join(", "));
        let ints: Vec<String> = self.lambda_int.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "lambda_int = [{}]", ints.join(", "));
        for (k, m) in self.minors.iter().enumerate() {
            let _ = writeln!(out, "delta_{} = \"{}\"", k + 1, m);
        }
        out
    }
}

/// `∂λ_min/∂λ_k = vᵀ (∂M/∂λ_k) v` for a unit eigenvector `v`.
fn supergradient_of(v: &[f64], g: &mut [f64]) {
    let d = v.len();
    if d == 1 {
        g[0] += 4.0 * v[0] * v[0];
        return;
    }
    g[0] += 4.0 * v[0] * v[0] - 2.0 * v[0] * v[1];
    for k in 1..d {
        let mut q = 2.0 * v[0] * v[k] + 2.0 * v[k] * v[k];
        if k + 1 < d {
            q -= 2.0 * v[k] * v[k + 1];
        }
        g[k] += q;
    }
}

/// Euclidean projection onto `{λ ≥ 0, Σλ = 1}` by sorting.
pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

fn project_interior(x: &[f64]) -> Vec<f64> {
    let p: Vec<f64> = project_simplex(x).into_iter().map(|v| v.max(LAMBDA_FLOOR)).collect();
    let s: f64 = p.iter().sum();
    p.into_iter().map(|v| v / s).collect()
}

/// Smallest eigenvalue of `M(λ)` and an averaged supergradient.
fn value_and_supergradient(lambda: &[f64]) -> (f64, Vec<f64>) {
    let d = lambda.len();
    let eig = build_matrix(lambda).symmetric_eigen();
    let min = eig.eigenvalues.min();
    let mut g = vec![0.0; d];
    let mut count = 0;
    for (k, &val) in eig.eigenvalues.iter().enumerate() {
        if val - min <= TIE_TOLERANCE {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            supergradient_of(&v, &mut g);
            count += 1;
        }
    }
    for x in &mut g {
        *x /= count as f64;
    }
    (min, g)
}

/// One projected supergradient run; returns the best `(λ_min, λ)` seen.
fn ascent(d: usize, iters: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
    let start: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let mut lambda = project_interior(&{
        let s: f64 = start.iter().sum();
        start.iter().map(|v| v / s).collect::<Vec<f64>>()
    });
    let mut best = (f64::NEG_INFINITY, lambda.clone());
    for it in 0..=iters {
        let (val, g) = value_and_supergradient(&lambda);
        if val > best.0 {
            best = (val, lambda.clone());
        }
        if it == iters {
            break;
        }
        let step = 0.5 / ((it + 1) as f64).sqrt();
        let moved: Vec<f64> = lambda.iter().zip(&g).map(|(l, g)| l + step * g).collect();
        lambda = project_interior(&moved);
    }
    best
}

/// Maximises `λ_min(M(λ))` over the simplex with independent restarts.
///
/// Restart `r` uses a ChaCha8 stream `r` of `seed`, so the result does not
/// depend on how restarts are scheduled.
pub fn search_lambda(d: usize, restarts: usize, iters: usize, seed: u64) -> LyapunovCandidate {
    assert!(d >= 1, "d must be at least 1");
    let restarts = restarts.max(1);
    let results: Vec<(f64, usize, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let (val, lambda) = ascent(d, iters, &mut rng);
            (val, r, lambda)
        })
        .collect();
    let best = results
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .expect("at least one restart");
    LyapunovCandidate::from_weights(&best.2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn matrix_examples() {
        assert_eq!(build_matrix(&[1.0]), mat(&[&[4.0]]));
        assert_eq!(build_matrix(&[1.0, 1.0]), mat(&[&[4.0, 0.0], &[0.0, 2.0]]));
        assert_eq!(
            build_matrix(&[1.0, 2.0, 3.0]),
            mat(&[&[4.0, 1.0, 3.0], &[1.0, 4.0, -2.0], &[3.0, -2.0, 6.0]])
        );
    }

    #[test]
    fn matrix_is_da_plus_transpose() {
        let lambda = [0.3, 1.1, 0.7, 2.0, 0.4];
        let model = crate::lv::LVModel::new(5).unwrap();
        let da = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&lambda)) * model.a_matrix();
        let want = &da + da.transpose();
        assert!((build_matrix(&lambda) - want).abs().max() < 1e-15);
    }

    #[test]
    fn published_minors() {
        let minors = leading_minors_exact(&published_lambda()).unwrap();
        let got: Vec<String> = minors.iter().map(|m| m.to_string()).collect();
        assert_eq!(got, PUBLISHED_MINORS);
    }

    #[test]
    fn rejects_non_positive_lambda() {
        assert!(leading_minors_exact(&[BigInt::from(1), BigInt::from(0)]).is_err());
        assert_eq!(leading_minors_exact(&[]), Err(LyapunovError::Empty));
    }

    #[test]
    fn pd_modes() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(is_positive_definite(&id, PdMode::Exact), PdVerdict::PositiveDefinite);
        assert_eq!(is_positive_definite(&id, PdMode::Float), PdVerdict::PositiveDefinite);
        let lp: Vec<f64> = PUBLISHED_LAMBDA.iter().map(|&v| v as f64).collect();
        let m = build_matrix(&lp);
        assert_eq!(is_positive_definite(&m, PdMode::Exact), PdVerdict::PositiveDefinite);
        assert_eq!(is_positive_definite(&m, PdMode::Float), PdVerdict::PositiveDefinite);
        let sing = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(is_positive_definite(&sing, PdMode::Float), PdVerdict::Indeterminate);
        assert_eq!(is_positive_definite(&sing, PdMode::Exact), PdVerdict::NotPositiveDefinite);
        let neg = mat(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(is_positive_definite(&neg, PdMode::Float), PdVerdict::NotPositiveDefinite);
    }

    #[test]
    fn ones_d11_agrees_with_brute_force() {
        let ones = vec![BigInt::from(1); 11];
        let m = build_matrix_exact(&ones);
        let minors = exact::leading_minors(&m);
        for k in 1..=11 {
            let block: IntMatrix = m[..k].iter().map(|r| r[..k].to_vec()).collect();
            assert_eq!(minors[k - 1], exact::determinant(&block));
        }
        let exact_verdict = minors.iter().all(|d| d.is_positive());
        let mf = build_matrix(&[1.0; 11]);
        assert_eq!(is_positive_definite(&mf, PdMode::Exact).as_bool(), Some(exact_verdict));
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let q = project_simplex(&[2.0, -1.0]);
        assert_eq!(q, vec![1.0, 0.0]);
        let r = project_interior(&[2.0, -1.0]);
        assert!(r[1] > 0.0 && (r.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn d1_search() {
        let c = search_lambda(1, 2, 10, 0);
        assert!(c.feasible);
        assert!((c.min_eig - 4.0).abs() < 1e-12);
    }

    #[test]
    fn supergradient_matches_finite_difference() {
        let lambda = [0.31, 0.22, 0.17, 0.30];
        let (f0, g) = value_and_supergradient(&lambda);
        let h = 1e-7;
        for k in 0..4 {
            let mut l = lambda;
            l[k] += h;
            let (f1, _) = value_and_supergradient(&l);
            assert!(((f1 - f0) / h - g[k]).abs() < 1e-5, "k={k}");
        }
    }

    #[test]
    fn report_lists_minors() {
        let c = LyapunovCandidate::from_weights(&[1.0, 1.0]);
        let text = c.report();
        assert!(text.contains("delta_2 = "));
        assert!(text.contains("feasible = true"));
    }
}
