//! Minimal dense symmetric-positive-definite helpers for the normal
//! equations. Matrices are row-major `n x n` slices; sizes here are the
//! handful of floated fit parameters, so no pivoting or blocking.

use alloc::vec;
use alloc::vec::Vec;

// f64 transcendentals come from num-traits in no_std builds
#[allow(unused_imports)]
use num_traits::Float;

/// Cholesky factorization `A = L L^T` in place (lower triangle).
/// Fails with the first pivot index that is not positive, which identifies
/// a direction the residuals do not constrain.
pub(crate) fn cholesky(a: &mut [f64], n: usize) -> Result<(), usize> {
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0f64, f64::max);
    let tol = 1e-13 * max_diag.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !d.is_finite() || d <= tol {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

fn solve_cholesky(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Solve `A x = b` for symmetric positive-definite `A`.
pub(crate) fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>, usize> {
    let mut l = a.to_vec();
    cholesky(&mut l, n)?;
    Ok(solve_cholesky(&l, n, b))
}

/// Inverse of a symmetric positive-definite matrix.
pub(crate) fn invert_spd(a: &[f64], n: usize) -> Result<Vec<f64>, usize> {
    let mut l = a.to_vec();
    cholesky(&mut l, n)?;
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = solve_cholesky(&l, n, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    // symmetrize away the factorization round-off
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_small_spd_system() {
        // A = [[4,2],[2,3]], b = [2, 5] -> x = [-0.5, 2]
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = solve_spd(&a, 2, &[2.0, 5.0]).unwrap();
        assert!((x[0] + 0.5).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inversion_roundtrips() {
        let a = [6.0, 2.0, 1.0, 2.0, 5.0, 2.0, 1.0, 2.0, 4.0];
        let inv = invert_spd(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i * 3 + k] * inv[k * 3 + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reports_the_degenerate_pivot() {
        // second row/column identically zero
        let a = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(solve_spd(&a, 2, &[1.0, 1.0]).unwrap_err(), 1);
        let a = [0.0, 0.0, 0.0, 0.0];
        assert_eq!(invert_spd(&a, 2).unwrap_err(), 0);
    }
}
