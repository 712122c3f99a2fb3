//! Small dense linear algebra on row-major square matrices.
//!
//! Everything here targets the desk-scale systems in this crate (dimension
//! a few dozen at most), so plain Gaussian elimination with partial pivoting
//! is used throughout. A pivot below `PIVOT_TOL` times the matrix scale is
//! reported as a conditioning failure rather than silently divided by.

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

pub fn matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(x.len(), n);
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().zip(x).map(|(&aij, &xj)| aij * xj).sum())
        .collect()
}

pub fn quad_form(a: &[f64], n: usize, x: &[f64]) -> f64 {
    matvec(a, n, x).iter().zip(x).map(|(&ax, &xi)| ax * xi).sum()
}

pub fn is_symmetric(a: &[f64], n: usize, tol: f64) -> bool {
    (0..n).all(|i| (i + 1..n).all(|j| (a[i * n + j] - a[j * n + i]).abs() <= tol))
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1.0);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap();
        let pivot = m[pivot_row * n + col];
        if pivot.abs() < PIVOT_TOL * scale {
            return Err(Error::Conditioning(format!(
                "pivot {pivot:.3e} in column {col} below tolerance"
            )));
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            x.swap(col, pivot_row);
        }
        for row in col + 1..n {
            let factor = m[row * n + col] / m[col * n + col];
            if factor == 0.0 {
                continue;
            }
            m[row * n + col] = 0.0;
            for k in col + 1..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= m[col * n + col];
        for row in 0..col {
            x[row] -= m[row * n + col] * x[col];
        }
    }
    Ok(x)
}

/// Invert `A` column by column.
pub fn inverse(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(a, n, &e)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Ok(inv)
}

/// Solve the principal subsystem `A[idx, idx] x = rhs`.
pub fn solve_subsystem(a: &[f64], n: usize, idx: &[usize], rhs: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(idx.len(), rhs.len());
    let k = idx.len();
    let mut sub = vec![0.0; k * k];
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            sub[r * k + c] = a[i * n + j];
        }
    }
    solve(&sub, k, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_known_system() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = solve(&a, 2, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = [2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let inv = inverse(&a, 3).unwrap();
        for i in 0..3 {
            let e = matvec(&a, 3, &inv[i..].iter().step_by(3).copied().collect::<Vec<_>>());
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e[j] - want).abs() < 1e-12, "entry ({i},{j}) = {}", e[j]);
            }
        }
    }

    #[test]
    fn singular_matrix_reports_conditioning() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(matches!(solve(&a, 2, &[1.0, 1.0]), Err(Error::Conditioning(_))));
    }

    #[test]
    fn subsystem_solve_matches_full_solve() {
        let a = [5.0, 1.0, 0.5, 1.0, 4.0, 0.25, 0.5, 0.25, 3.0];
        let x = solve_subsystem(&a, 3, &[0, 2], &[1.0, 1.0]).unwrap();
        // Direct 2x2 solve of [[5, 0.5], [0.5, 3]] x = [1, 1].
        let det = 5.0 * 3.0 - 0.25;
        assert!((x[0] - (3.0 - 0.5) / det).abs() < 1e-14);
        assert!((x[1] - (5.0 - 0.5) / det).abs() < 1e-14);
    }
}
