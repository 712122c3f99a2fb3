//! Market instances, matchings, and equilibrium outcome records.
//!
//! A market has two finite type lists with nonnegative masses, pairwise
//! systematic utilities `alpha` and `gamma`, and per-type reservation values
//! for staying unmatched. Matchings are nonnegative mass matrices plus the
//! unmatched masses of each side.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Default absolute tolerance for equality checks in this module.
pub const MODEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct MarketInstance {
    pub types_x: Vec<String>,
    pub types_y: Vec<String>,
    /// Mass per x type.
    pub n: Vec<f64>,
    /// Mass per y type.
    pub m: Vec<f64>,
    pub alpha: Matrix,
    pub gamma: Matrix,
    /// Reservation utility of an unmatched x, one per x type.
    pub alpha_x0: Vec<f64>,
    /// Reservation utility of an unmatched y, one per y type.
    pub gamma_0y: Vec<f64>,
}

impl MarketInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        types_x: Vec<String>,
        types_y: Vec<String>,
        n: Vec<f64>,
        m: Vec<f64>,
        alpha: Matrix,
        gamma: Matrix,
        alpha_x0: Vec<f64>,
        gamma_0y: Vec<f64>,
    ) -> Result<Self> {
        let (x, y) = (types_x.len(), types_y.len());
        for (i, t) in types_x.iter().enumerate() {
            if types_x[..i].contains(t) {
                return Err(Error::Domain(format!("duplicate x type {t:?}")));
            }
        }
        for (j, t) in types_y.iter().enumerate() {
            if types_y[..j].contains(t) {
                return Err(Error::Domain(format!("duplicate y type {t:?}")));
            }
        }
        if n.len() != x || m.len() != y || alpha_x0.len() != x || gamma_0y.len() != y {
            return Err(Error::Shape("mass or reservation lengths do not match types".into()));
        }
        if alpha.shape() != (x, y) || gamma.shape() != (x, y) {
            return Err(Error::Shape(format!(
                "utility matrices must be {x}x{y}, got {:?} and {:?}",
                alpha.shape(),
                gamma.shape()
            )));
        }
        if n.iter().chain(&m).any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("masses must be finite and nonnegative".into()));
        }
        if !alpha.all_finite() || !gamma.all_finite() {
            return Err(Error::Domain("systematic utilities must be finite".into()));
        }
        if alpha_x0.iter().chain(&gamma_0y).any(|v| !v.is_finite()) {
            return Err(Error::Domain("reservation utilities must be finite".into()));
        }
        Ok(Self { types_x, types_y, n, m, alpha, gamma, alpha_x0, gamma_0y })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.types_x.len(), self.types_y.len())
    }
}

/// Nonnegative pair masses plus the unmatched mass of each type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub mu: Matrix,
    pub mu_x0: Vec<f64>,
    pub mu_0y: Vec<f64>,
}

impl Matching {
    pub fn new(mu: Matrix, mu_x0: Vec<f64>, mu_0y: Vec<f64>) -> Result<Self> {
        if mu_x0.len() != mu.rows() || mu_0y.len() != mu.cols() {
            return Err(Error::Shape("unmatched mass lengths do not match mu".into()));
        }
        let neg = mu.as_slice().iter().chain(&mu_x0).chain(&mu_0y).any(|&v| v < 0.0);
        if neg {
            return Err(Error::Domain("matching masses must be nonnegative".into()));
        }
        Ok(Self { mu, mu_x0, mu_0y })
    }

    /// Build from pair masses and population masses, with the unmatched
    /// masses as the marginal slack. Slack within `-1e-12 * max(1, mass)` is
    /// snapped to zero; larger negatives are rejected.
    pub fn from_mu(mu: Matrix, n: &[f64], m: &[f64]) -> Result<Self> {
        if n.len() != mu.rows() || m.len() != mu.cols() {
            return Err(Error::Shape("population lengths do not match mu".into()));
        }
        let snap = |slack: f64, scale: f64| -> Result<f64> {
            if slack >= 0.0 {
                Ok(slack)
            } else if slack >= -1e-12 * scale.max(1.0) {
                Ok(0.0)
            } else {
                Err(Error::Domain(format!("pair masses exceed a population mass by {slack:e}")))
            }
        };
        let mu_x0 = (0..mu.rows())
            .map(|i| snap(n[i] - mu.row_sum(i), n[i]))
            .collect::<Result<Vec<_>>>()?;
        let mu_0y = (0..mu.cols())
            .map(|j| snap(m[j] - mu.col_sum(j), m[j]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mu, mu_x0, mu_0y)
    }
}

/// Sup-norm of the marginal constraint residuals of both sides.
pub fn feasibility_residual(matching: &Matching, inst: &MarketInstance) -> Result<f64> {
    let (x, y) = inst.shape();
    if matching.mu.shape() != (x, y) {
        return Err(Error::Shape("matching shape does not match the instance".into()));
    }
    let mut worst = 0.0f64;
    for i in 0..x {
        worst = worst.max((matching.mu.row_sum(i) + matching.mu_x0[i] - inst.n[i]).abs());
    }
    for j in 0..y {
        worst = worst.max((matching.mu.col_sum(j) + matching.mu_0y[j] - inst.m[j]).abs());
    }
    Ok(worst)
}

/// Classical stability report; every field is a signed worst violation,
/// nonpositive (up to `tol`) when the condition holds.
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalReport {
    pub pass: bool,
    /// Marginal constraint residual (absolute).
    pub feasibility: f64,
    /// Worst blocking margin `min(alpha_xy - u_x, gamma_xy - v_y)`.
    pub blocking: f64,
    /// Worst reservation shortfall `max(alpha_x0 - u_x, gamma_0y - v_y)`.
    pub reservation: f64,
    /// Worst complementary slackness gap on matched or unmatched mass.
    pub complementarity: f64,
    pub tol: f64,
}

/// Stability of a scalar-utility outcome `(mu, u, v)`: no blocking pair, u
/// and v above reservations, and complementary slackness where mass flows.
pub fn classical_equilibrium_check(
    matching: &Matching,
    u: &[f64],
    v: &[f64],
    inst: &MarketInstance,
    tol: f64,
) -> Result<ClassicalReport> {
    let (x, y) = inst.shape();
    if u.len() != x || v.len() != y {
        return Err(Error::Shape("utility vector lengths do not match the instance".into()));
    }
    let feasibility = feasibility_residual(matching, inst)?;

    let mut blocking = f64::NEG_INFINITY;
    let mut complementarity = f64::NEG_INFINITY;
    for i in 0..x {
        for j in 0..y {
            let margin = (u[i] - inst.alpha[(i, j)]).max(v[j] - inst.gamma[(i, j)]);
            blocking = blocking.max(-margin);
            if matching.mu[(i, j)] > tol {
                complementarity = complementarity.max(margin.abs());
            }
        }
    }
    let mut reservation = f64::NEG_INFINITY;
    for i in 0..x {
        reservation = reservation.max(inst.alpha_x0[i] - u[i]);
        if matching.mu_x0[i] > tol {
            complementarity = complementarity.max((u[i] - inst.alpha_x0[i]).abs());
        }
    }
    for j in 0..y {
        reservation = reservation.max(inst.gamma_0y[j] - v[j]);
        if matching.mu_0y[j] > tol {
            complementarity = complementarity.max((v[j] - inst.gamma_0y[j]).abs());
        }
    }

    // Empty quantifiers mean the condition holds vacuously.
    let blocking = if blocking.is_finite() { blocking } else { 0.0 };
    let reservation = if reservation.is_finite() { reservation } else { 0.0 };
    let complementarity = if complementarity.is_finite() { complementarity } else { 0.0 };
    let pass = feasibility <= tol
        && blocking <= tol
        && reservation <= tol
        && complementarity <= tol;
    Ok(ClassicalReport { pass, feasibility, blocking, reservation, complementarity, tol })
}

/// Pairwise utility matrices from scalar utilities: `U_xy = min(u_x,
/// alpha_xy)`, `V_xy = min(v_y, gamma_xy)`.
pub fn uv_from_scalar(u: &[f64], v: &[f64], alpha: &Matrix, gamma: &Matrix) -> (Matrix, Matrix) {
    let big_u = Matrix::from_fn(alpha.rows(), alpha.cols(), |i, j| u[i].min(alpha[(i, j)]));
    let big_v = Matrix::from_fn(gamma.rows(), gamma.cols(), |i, j| v[j].min(gamma[(i, j)]));
    (big_u, big_v)
}

/// Converged matching with its supporting utilities and multipliers.
///
/// `u` and `v` live in `R ∪ {-inf}` (a `-inf` entry marks a route priced
/// out entirely); the multipliers live in `R ∪ {+inf}`.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumOutcome {
    pub matching: Matching,
    pub u: Matrix,
    pub v: Matrix,
    pub tau_alpha: Matrix,
    pub tau_gamma: Matrix,
    /// Named diagnostic scalars (stop residual and friends).
    pub residuals: BTreeMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
}
