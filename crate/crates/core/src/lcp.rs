//! Linear complementarity and box-constrained quadratic programs.
//!
//! The solver pairs projected Gauss-Seidel sweeps with an exact solve on the
//! detected active set. PGS converges for P-matrices (in particular for
//! symmetric positive definite `S`), and the polish removes the iterative
//! tail so complementarity holds to solver precision rather than sweep
//! precision.

use crate::linalg::{inverse, is_symmetric, matvec, solve_subsystem};
use crate::{Error, Result};

/// Complementarity acceptance: `|r.tau| <= COMP_TOL`, `min(r, tau) >= -COMP_TOL`.
pub const COMP_TOL: f64 = 1e-10;
const SWEEP_CAP: usize = 10_000;
/// Sweeps between polish attempts.
const POLISH_EVERY: usize = 50;

/// Data of `r = S tau + rho`, `r perp tau`, `r, tau >= 0`.
#[derive(Debug, Clone)]
pub struct LcpInstance {
    s: Vec<f64>,
    rho: Vec<f64>,
}

impl LcpInstance {
    pub fn new(s: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let n = rho.len();
        if s.len() != n * n {
            return Err(Error::Shape(format!(
                "matrix of {} entries against a vector of {n}",
                s.len()
            )));
        }
        if s.iter().chain(&rho).any(|v| !v.is_finite()) {
            return Err(Error::Domain("complementarity data must be finite".into()));
        }
        Ok(Self { s, rho })
    }

    pub fn dim(&self) -> usize {
        self.rho.len()
    }
}

/// Symmetric, positive definite (by Cholesky), nonpositive off-diagonal.
pub fn is_stieltjes(a: &[f64], n: usize) -> bool {
    if a.len() != n * n || !is_symmetric(a, n, 1e-9) {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && a[i * n + j] > 0.0 {
                return false;
            }
        }
    }
    is_positive_definite(a, n)
}

/// Positive definiteness via an in-place Cholesky attempt.
pub(crate) fn is_positive_definite(a: &[f64], n: usize) -> bool {
    let mut l = a.to_vec();
    for k in 0..n {
        for j in 0..k {
            let f = l[k * n + j];
            for i in k..n {
                l[i * n + k] -= f * l[i * n + j];
            }
        }
        let d = l[k * n + k];
        if !(d > 0.0) {
            return false;
        }
        let root = d.sqrt();
        for i in k..n {
            l[i * n + k] /= root;
        }
    }
    true
}

fn comp_residual(r: &[f64], tau: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (&ri, &ti) in r.iter().zip(tau) {
        worst = worst.max((ri * ti).abs()).max(-ri.min(ti));
    }
    worst
}

/// Exact solve on a trial active set; `None` when the subsystem is singular
/// or the candidate violates feasibility.
fn try_polish(s: &[f64], rho: &[f64], active: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = rho.len();
    let rhs: Vec<f64> = active.iter().map(|&i| -rho[i]).collect();
    let tau_a = solve_subsystem(s, n, active, &rhs).ok()?;
    let mut tau = vec![0.0; n];
    for (k, &i) in active.iter().enumerate() {
        tau[i] = tau_a[k];
    }
    let mut r = matvec(s, n, &tau);
    for i in 0..n {
        r[i] += rho[i];
    }
    // The active rows solve to zero up to roundoff; snap them so the
    // complementarity product is exact.
    for &i in active {
        r[i] = 0.0;
    }
    (comp_residual(&r, &tau) <= COMP_TOL).then_some((r, tau))
}

/// Solve the complementarity problem; `S` must be positive definite.
pub fn lcp_solve(inst: &LcpInstance) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = inst.dim();
    let (s, rho) = (&inst.s, &inst.rho);
    for i in 0..n {
        if !(s[i * n + i] > 0.0) {
            return Err(Error::Conditioning(format!("nonpositive diagonal at {i}")));
        }
    }

    let mut tau = vec![0.0; n];
    let mut last_residual = f64::INFINITY;
    for sweep in 1..=SWEEP_CAP {
        for i in 0..n {
            let mut acc = rho[i];
            for j in 0..n {
                if j != i {
                    acc += s[i * n + j] * tau[j];
                }
            }
            tau[i] = (-acc / s[i * n + i]).max(0.0);
        }
        if sweep % POLISH_EVERY == 0 || sweep == SWEEP_CAP {
            let mut r = matvec(s, n, &tau);
            for i in 0..n {
                r[i] += rho[i];
            }
            last_residual = comp_residual(&r, &tau);
            let scale = tau.iter().fold(1.0f64, |m, &t| m.max(t.abs()));
            let active: Vec<usize> =
                (0..n).filter(|&i| tau[i] > 1e-9 * scale).collect();
            if let Some(exact) = try_polish(s, rho, &active) {
                return Ok(exact);
            }
        }
    }
    Err(Error::IterationLimit { iterations: SWEEP_CAP, residual: last_residual })
}

/// Rejected quantity and multiplier of the capped quadratic instance:
/// `S = A^{-1}`, `rho = q_bar - S p`, `r = q_bar - q`.
pub fn quadratic_residual(p: &[f64], q_bar: &[f64], a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.len();
    if q_bar.len() != n || a.len() != n * n {
        return Err(Error::Shape("price, cap, and matrix sizes disagree".into()));
    }
    if !is_symmetric(a, n, 1e-9) {
        return Err(Error::Domain("quadratic coefficient matrix must be symmetric".into()));
    }
    let s = inverse(a, n)?;
    let sp = matvec(&s, n, p);
    let rho: Vec<f64> = (0..n).map(|i| q_bar[i] - sp[i]).collect();
    lcp_solve(&LcpInstance::new(s, rho)?)
}

/// Argmax of `alpha.mu - mu' A mu / 2` over the box `[lo, hi]`, by projected
/// coordinate ascent plus an exact solve on the free set. `A` must be
/// positive definite.
pub fn box_qp_argmax(
    a: &[f64],
    alpha: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Result<Vec<f64>> {
    let n = alpha.len();
    if a.len() != n * n || lo.len() != n || hi.len() != n {
        return Err(Error::Shape("box QP sizes disagree".into()));
    }
    for i in 0..n {
        if !(lo[i] <= hi[i]) {
            return Err(Error::Domain(format!("empty box at coordinate {i}")));
        }
        if !(a[i * n + i] > 0.0) {
            return Err(Error::Conditioning(format!("nonpositive diagonal at {i}")));
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let scale = alpha.iter().chain(hi).fold(1.0f64, |m, &v| m.max(v.abs()));
    let kkt_tol = 1e-11 * scale;
    let check = |mu: &[f64]| -> bool {
        let g: Vec<f64> = {
            let amu = matvec(a, n, mu);
            (0..n).map(|i| alpha[i] - amu[i]).collect()
        };
        (0..n).all(|i| {
            if mu[i] <= lo[i] + kkt_tol && g[i] <= kkt_tol {
                true
            } else if mu[i] >= hi[i] - kkt_tol && g[i] >= -kkt_tol {
                true
            } else {
                g[i].abs() <= kkt_tol
            }
        })
    };

    let mut mu: Vec<f64> = (0..n).map(|i| lo[i].max(0.0_f64.min(hi[i]))).collect();
    let mut last_residual = f64::INFINITY;
    for sweep in 1..=SWEEP_CAP {
        for i in 0..n {
            let mut acc = alpha[i];
            for j in 0..n {
                if j != i {
                    acc -= a[i * n + j] * mu[j];
                }
            }
            mu[i] = (acc / a[i * n + i]).clamp(lo[i], hi[i]);
        }
        if sweep % POLISH_EVERY == 0 || sweep == SWEEP_CAP {
            // Exact solve with the clamped coordinates fixed.
            let free: Vec<usize> = (0..n)
                .filter(|&i| mu[i] > lo[i] + kkt_tol && mu[i] < hi[i] - kkt_tol)
                .collect();
            let mut polished = mu.clone();
            for &i in &free {
                polished[i] = 0.0;
            }
            let coupling = matvec(a, n, &polished);
            let rhs: Vec<f64> = free.iter().map(|&i| alpha[i] - coupling[i]).collect();
            if let Ok(sol) = solve_subsystem(a, n, &free, &rhs) {
                for (k, &i) in free.iter().enumerate() {
                    polished[i] = sol[k].clamp(lo[i], hi[i]);
                }
                if check(&polished) {
                    return Ok(polished);
                }
            }
            if check(&mu) {
                return Ok(mu);
            }
            let amu = matvec(a, n, &mu);
            last_residual = (0..n)
                .map(|i| {
                    let g = alpha[i] - amu[i];
                    if mu[i] <= lo[i] + kkt_tol {
                        (-g).min(0.0).abs()
                    } else if mu[i] >= hi[i] - kkt_tol {
                        g.min(0.0).abs()
                    } else {
                        g.abs()
                    }
                })
                .fold(0.0f64, f64::max);
        }
    }
    Err(Error::IterationLimit { iterations: SWEEP_CAP, residual: last_residual })
}
