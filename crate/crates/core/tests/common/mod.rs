//! Shared generators and independent oracles for the integration suites.
//!
//! Everything here is deliberately written from the definitions, without
//! calling into the library's own solvers, so agreement is evidence rather
//! than circularity.

#![allow(dead_code)]

use matron::linalg::{matvec, solve_subsystem};
use matron::matrix::Matrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.gen::<f64>()
}

/// Symmetric, strictly diagonally dominant, nonpositive off-diagonal:
/// a Stieltjes matrix by Gershgorin.
pub fn stieltjes_matrix(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = -uniform(r, 0.2, 1.0);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i * n + j].abs()).sum();
        a[i * n + i] = off + uniform(r, 0.3, 1.0);
    }
    a
}

/// Symmetric positive definite (diagonally dominant) with one strictly
/// positive off-diagonal pair, hence not Stieltjes.
pub fn positive_offdiag_matrix(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let mut a = stieltjes_matrix(r, n);
    let i = r.gen_range(0..n);
    let j = (i + 1 + r.gen_range(0..n - 1)) % n;
    let v = uniform(r, 0.4, 1.0);
    a[i * n + j] = v;
    a[j * n + i] = v;
    // Restore dominance after the sign flip.
    for k in [i, j] {
        let off: f64 = (0..n).filter(|&l| l != k).map(|l| a[k * n + l].abs()).sum();
        a[k * n + k] = off + uniform(r, 0.3, 1.0);
    }
    a
}

/// Exhaustive active-set solution of `r = S tau + rho`, `r, tau >= 0`,
/// `r . tau = 0`. Feasible for every positive definite `S`; the solution is
/// unique, so the first valid subset is the answer.
pub fn lcp_oracle(s: &[f64], rho: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = rho.len();
    assert!(n <= 16, "oracle is exponential in the size");
    for mask in 0..(1usize << n) {
        let active: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let rhs: Vec<f64> = active.iter().map(|&i| -rho[i]).collect();
        let Ok(t) = solve_subsystem(s, n, &active, &rhs) else { continue };
        if t.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut tau = vec![0.0; n];
        for (k, &i) in active.iter().enumerate() {
            tau[i] = t[k].max(0.0);
        }
        let mut r = matvec(s, n, &tau);
        for i in 0..n {
            r[i] += rho[i];
        }
        for &i in &active {
            r[i] = 0.0;
        }
        if r.iter().all(|&v| v >= -1e-12) {
            return Some((r.iter().map(|&v| v.max(0.0)).collect(), tau));
        }
    }
    None
}

/// A random logit-logit market at desk scale.
pub struct LogitInstance {
    pub x: usize,
    pub y: usize,
    pub n: Vec<f64>,
    pub m: Vec<f64>,
    pub alpha: Matrix,
    pub gamma: Matrix,
}

pub fn random_logit_instance(r: &mut ChaCha8Rng, max_dim: usize) -> LogitInstance {
    let x = r.gen_range(1..=max_dim);
    let y = r.gen_range(1..=max_dim);
    let n = (0..x).map(|_| uniform(r, 0.5, 2.0)).collect();
    let m = (0..y).map(|_| uniform(r, 0.5, 2.0)).collect();
    let alpha = Matrix::from_fn(x, y, |_, _| uniform(r, -1.0, 1.0));
    let gamma = Matrix::from_fn(x, y, |_, _| uniform(r, -1.0, 1.0));
    LogitInstance { x, y, n, m, alpha, gamma }
}

/// Worst violation of the aggregate logit matching system
/// `mu_x0 + sum_y min(mu_x0 e^a, mu_0y e^g) = n_x` and its y counterpart.
pub fn logit_system_residual(
    mu_x0: &[f64],
    mu_0y: &[f64],
    alpha: &Matrix,
    gamma: &Matrix,
    n: &[f64],
    m: &[f64],
) -> f64 {
    let (x, y) = alpha.shape();
    let pair = |i: usize, j: usize| {
        (mu_x0[i] * alpha[(i, j)].exp()).min(mu_0y[j] * gamma[(i, j)].exp())
    };
    let mut worst = 0.0f64;
    for i in 0..x {
        let total: f64 = (0..y).map(|j| pair(i, j)).sum();
        worst = worst.max((mu_x0[i] + total - n[i]).abs());
    }
    for j in 0..y {
        let total: f64 = (0..x).map(|i| pair(i, j)).sum();
        worst = worst.max((mu_0y[j] + total - m[j]).abs());
    }
    worst
}

/// Pair masses implied by the unmatched masses through the min formula.
pub fn logit_mu_from_margins(
    mu_x0: &[f64],
    mu_0y: &[f64],
    alpha: &Matrix,
    gamma: &Matrix,
) -> Matrix {
    Matrix::from_fn(alpha.rows(), alpha.cols(), |i, j| {
        (mu_x0[i] * alpha[(i, j)].exp()).min(mu_0y[j] * gamma[(i, j)].exp())
    })
}

/// Independent solver for the logit matching system: damped Gauss-Seidel on
/// the unmatched masses, each one-dimensional equation solved by plain
/// bisection. Returns `(mu_x0, mu_0y)`.
pub fn damped_logit_oracle(
    alpha: &Matrix,
    gamma: &Matrix,
    n: &[f64],
    m: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (x, y) = alpha.shape();
    let mut mu_x0: Vec<f64> = n.to_vec();
    let mut mu_0y: Vec<f64> = m.to_vec();
    // t + sum_j min(t e^a, other_j e^g) is continuous and strictly
    // increasing in t, so the root in [0, total] is unique.
    let solve_row = |total: f64, weights: &[f64], others: &[f64]| -> f64 {
        if total == 0.0 {
            return 0.0;
        }
        let eval = |t: f64| -> f64 {
            t + weights
                .iter()
                .zip(others)
                .map(|(&w, &o)| (t * w).min(o))
                .sum::<f64>()
        };
        let (mut a, mut b) = (0.0f64, total);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if eval(mid) < total {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };

    for _ in 0..20_000 {
        let mut delta = 0.0f64;
        for i in 0..x {
            let weights: Vec<f64> = (0..y).map(|j| alpha[(i, j)].exp()).collect();
            let others: Vec<f64> =
                (0..y).map(|j| mu_0y[j] * gamma[(i, j)].exp()).collect();
            let root = solve_row(n[i], &weights, &others);
            let next = 0.5 * (mu_x0[i] + root);
            delta = delta.max((next - mu_x0[i]).abs());
            mu_x0[i] = next;
        }
        for j in 0..y {
            let weights: Vec<f64> = (0..x).map(|i| gamma[(i, j)].exp()).collect();
            let others: Vec<f64> =
                (0..x).map(|i| mu_x0[i] * alpha[(i, j)].exp()).collect();
            let root = solve_row(m[j], &weights, &others);
            let next = 0.5 * (mu_0y[j] + root);
            delta = delta.max((next - mu_0y[j]).abs());
            mu_0y[j] = next;
        }
        if delta <= 1e-13 {
            break;
        }
    }
    (mu_x0, mu_0y)
}
