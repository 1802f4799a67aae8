//! Fraction-free (Bareiss) elimination over arbitrary-precision integers.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

/// Square integer matrix stored as rows.
pub type IntMatrix = Vec<Vec<BigInt>>;

/// Determinant with row pivoting.
pub fn determinant(m: &IntMatrix) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::from(1);
    }
    let mut a = m.clone();
    let mut negate = false;
    let mut prev = BigInt::from(1);
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    negate = !negate;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[k][k] * &a[i][j] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if negate {
        -det
    } else {
        det
    }
}

/// All leading principal minors `Δ_1, …, Δ_n`.
///
/// Bareiss elimination without pivoting leaves `Δ_{k+1}` on the diagonal
/// after step `k`. If some `Δ_k` vanishes the elimination cannot continue,
/// and the remaining minors are computed one by one with pivoting.
pub fn leading_minors(m: &IntMatrix) -> Vec<BigInt> {
    let n = m.len();
    let mut minors = Vec::with_capacity(n);
    let mut a = m.clone();
    let mut prev = BigInt::from(1);
    for k in 0..n {
        let pivot = a[k][k].clone();
        minors.push(pivot.clone());
        if pivot.is_zero() {
            for size in k + 2..=n {
                let block: IntMatrix = m[..size].iter().map(|row| row[..size].to_vec()).collect();
                minors.push(determinant(&block));
            }
            return minors;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &pivot * &a[i][j] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = pivot;
    }
    minors
}

/// Sylvester's criterion on exact integers.
pub fn is_positive_definite(m: &IntMatrix) -> bool {
    leading_minors(m).iter().all(|d| d.is_positive())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::One;

    fn int(rows: &[&[i64]]) -> IntMatrix {
        rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect()
    }

    /// Gaussian elimination over the rationals.
    fn det_rational(m: &IntMatrix) -> BigInt {
        let n = m.len();
        let mut a: Vec<Vec<BigRational>> = m.iter().map(|r| r.iter().map(|v| BigRational::from_integer(v.clone())).collect()).collect();
        let mut det = BigRational::one();
        for k in 0..n {
            let Some(p) = (k..n).find(|&r| !a[r][k].is_zero()) else {
                return BigInt::zero();
            };
            if p != k {
                a.swap(p, k);
                det = -det;
            }
            det *= a[k][k].clone();
            for i in k + 1..n {
                let f = a[i][k].clone() / a[k][k].clone();
                for j in k..n {
                    let v = f.clone() * a[k][j].clone();
                    a[i][j] -= v;
                }
            }
        }
        assert!(det.is_integer());
        det.to_integer()
    }

    #[test]
    fn small_determinants() {
        assert_eq!(determinant(&int(&[&[3]])), BigInt::from(3));
        assert_eq!(determinant(&int(&[&[1, 2], &[3, 4]])), BigInt::from(-2));
        assert_eq!(determinant(&int(&[&[0, 1], &[1, 0]])), BigInt::from(-1));
        assert_eq!(determinant(&int(&[&[1, 2], &[2, 4]])), BigInt::zero());
        assert_eq!(determinant(&int(&[&[2, 0, 1], &[1, 3, 2], &[1, 1, 1]])), det_rational(&int(&[&[2, 0, 1], &[1, 3, 2], &[1, 1, 1]])));
    }

    #[test]
    fn minors_with_zero_pivot() {
        let m = int(&[&[0, 1, 2], &[1, 0, 3], &[2, 3, 1]]);
        let minors = leading_minors(&m);
        assert_eq!(minors[0], BigInt::zero());
        assert_eq!(minors[1], BigInt::from(-1));
        assert_eq!(minors[2], det_rational(&m));
        assert!(!is_positive_definite(&m));
    }

    #[test]
    fn identity_is_positive_definite() {
        let m = int(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        assert!(is_positive_definite(&m));
        assert!(leading_minors(&m).iter().all(|d| d.is_one()));
    }
}
