//! Minimal dense linear algebra for small symmetric/stochastic systems.
//!
//! The matrices here are tiny (Fisher matrices up to a few dozen rows,
//! transition matrices up to k=256), so plain row-major `Vec<f64>` with
//! partial-pivot elimination is all we need.

/// Cholesky factor of a symmetric matrix, or `None` if it is not positive
/// definite. `a` is row-major `n x n`; only the lower triangle is read.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// log of det(A) for symmetric positive definite A, via Cholesky.
pub(crate) fn ln_det_spd(a: &[f64], n: usize) -> Option<f64> {
    let l = cholesky(a, n)?;
    let mut ln_det = 0.0;
    for i in 0..n {
        ln_det += 2.0 * l[i * n + i].ln();
    }
    Some(ln_det)
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` when A is singular to working precision.
pub(crate) fn solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for j in row + 1..n {
            s -= a[row * n + j] * x[j];
        }
        x[row] = s / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_detects_indefinite() {
        // [[1, 2], [2, 1]] has eigenvalues 3 and -1.
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
        assert!(cholesky(&[2.0, 1.0, 1.0, 2.0], 2).is_some());
    }

    #[test]
    fn ln_det_matches_hand_value() {
        // det [[2,1],[1,2]] = 3
        let ld = ln_det_spd(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((ld - 3.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn solve_small_system() {
        // x + y = 3, x - y = 1  =>  x = 2, y = 1
        let x = solve(vec![1.0, 1.0, 1.0, -1.0], vec![3.0, 1.0], 2).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_rejects_singular() {
        assert!(solve(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0], 2).is_none());
    }
}
