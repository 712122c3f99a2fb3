//! Welfare functions: value, conjugate, capped demand, and multipliers.
//!
//! A welfare function describes one market side by its aggregate indirect
//! utility `G`. Everything the matching algorithm needs is the Fenchel
//! data: `G` itself, its conjugate `G*` (with bounded domain containing 0),
//! the demand cap, the demand constrained to a box, and the multipliers of
//! a cap constraint (the inf selection). Three instances are provided: the
//! closed-form logit, a quadratic conjugate backed by the box-QP solver,
//! and a grid oracle that answers everything by exhaustive lattice search.
//!
//! Utilities live in `R ∪ {-inf}` (a `-inf` entry closes a route) and
//! multipliers in `R ∪ {+inf}`; inner products follow the `0 * inf = 0`
//! convention.

use crate::extreal::ext_dot;
use crate::grid::GridFunction;
use crate::lcp::box_qp_argmax;
use crate::linalg::{is_symmetric, matvec, quad_form};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Row-equation residual bound, relative to `max(1, n_x)`.
pub const ROW_RESIDUAL_TOL: f64 = 1e-12;
/// Bisection interval target and iteration cap.
const BISECT_TOL: f64 = 1e-13;
const BISECT_CAP: usize = 200;
/// Node budget for the grid oracle.
const GRID_BUDGET: usize = 2_000_000;

/// One market side given by its Fenchel data.
///
/// `hi` and `lo` box the demand entrywise; `multipliers` prices the upper
/// box `mu <= hi` and returns the smallest valid multiplier, with `+inf`
/// where a zero cap shuts a route the side still wants.
pub trait Welfare: Send + Sync {
    fn shape(&self) -> (usize, usize);
    /// `G(u)`; entries of `u` in `R ∪ {-inf}`.
    fn value(&self, u: &Matrix) -> Result<f64>;
    /// `G*(mu)`, `+inf` outside the domain.
    fn conjugate(&self, mu: &Matrix) -> Result<f64>;
    /// Entrywise bound `n^G` on the conjugate domain.
    fn demand_cap(&self) -> Matrix;
    /// A maximizer of `<mu, alpha> - G*(mu)` over `lo <= mu <= hi`.
    fn constrained_demand(&self, alpha: &Matrix, hi: &Matrix, lo: &Matrix) -> Result<Matrix>;
    /// Inf multipliers of the cap `mu <= hi` at `constrained_demand(alpha,
    /// hi, 0)`.
    fn multipliers(&self, alpha: &Matrix, hi: &Matrix) -> Result<Matrix>;
}

/// `value(u) + conjugate(mu) - <mu, u>`; nonnegative, and within `tol` of
/// zero exactly when `mu` is a subgradient selection at `u`.
pub fn welfare_fenchel_residual(w: &dyn Welfare, u: &Matrix, mu: &Matrix) -> Result<f64> {
    u.require_same_shape(mu, "fenchel residual")?;
    let conj = w.conjugate(mu)?;
    if conj == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(w.value(u)? + conj - ext_dot(mu.as_slice(), u.as_slice()))
}

fn require_shape(w: &dyn Welfare, m: &Matrix, what: &str) -> Result<()> {
    if m.shape() == w.shape() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what}: expected {:?}, got {:?}",
            w.shape(),
            m.shape()
        )))
    }
}

// ---------------------------------------------------------------------------
// Logit closed forms (row-oriented free functions).

fn no_plus_inf(m: &Matrix, what: &str) -> Result<()> {
    if m.as_slice().iter().any(|&v| v == f64::INFINITY) {
        return Err(Error::Domain(format!("{what} must not contain +inf")));
    }
    Ok(())
}

/// `sum_x n_x log(1 + sum_y exp(alpha_xy))`, guarded against overflow.
pub fn logit_value(alpha: &Matrix, n: &[f64]) -> Result<f64> {
    if n.len() != alpha.rows() {
        return Err(Error::Shape("mass vector length does not match alpha rows".into()));
    }
    no_plus_inf(alpha, "logit utilities")?;
    let mut total = 0.0;
    for (x, &nx) in n.iter().enumerate() {
        if nx == 0.0 {
            continue;
        }
        let row = &alpha.as_slice()[x * alpha.cols()..(x + 1) * alpha.cols()];
        // Shift by the largest exponent (at least 0 for the outside option).
        let shift = row.iter().fold(0.0f64, |m, &a| m.max(a));
        let sum: f64 = row.iter().map(|&a| (a - shift).exp()).sum();
        total += nx * (shift + ((-shift).exp() + sum).ln());
    }
    Ok(total)
}

/// Entropy form of the logit conjugate; `+inf` outside `{mu >= 0,
/// sum_y mu_xy <= n_x}`.
pub fn logit_conjugate(mu: &Matrix, n: &[f64]) -> Result<f64> {
    if n.len() != mu.rows() {
        return Err(Error::Shape("mass vector length does not match mu rows".into()));
    }
    let xlogx = |v: f64| if v == 0.0 { 0.0 } else { v * v.ln() };
    let mut total = 0.0;
    for (x, &nx) in n.iter().enumerate() {
        let row = &mu.as_slice()[x * mu.cols()..(x + 1) * mu.cols()];
        let slack_tol = 1e-12 * nx.max(1.0);
        let mut row_sum = 0.0;
        for &v in row {
            if v < -slack_tol {
                return Ok(f64::INFINITY);
            }
            row_sum += v.max(0.0);
        }
        let mut mu_x0 = nx - row_sum;
        if mu_x0 < -slack_tol {
            return Ok(f64::INFINITY);
        }
        mu_x0 = mu_x0.max(0.0);
        total += row.iter().map(|&v| xlogx(v.max(0.0))).sum::<f64>() + xlogx(mu_x0)
            - xlogx(nx);
    }
    Ok(total)
}

/// Solve one logit row: `mu_x0 + sum_y clamp(mu_x0 e^{alpha_y}, lo_y, hi_y)
/// = n_x`. The map is continuous and strictly increasing in `mu_x0`, so
/// bisection on `[0, n_x]` is safe; a final exact solve on the detected
/// clamp pattern removes the bisection tail (the map is piecewise linear).
fn logit_row_solve(alpha: &[f64], lo: &[f64], hi: &[f64], nx: f64) -> Result<(Vec<f64>, f64)> {
    let y = alpha.len();
    let lo_sum: f64 = lo.iter().sum();
    if lo_sum > nx + 1e-9 * nx.max(1.0) {
        return Err(Error::Domain(format!(
            "row lower bounds sum to {lo_sum}, exceeding the mass {nx}"
        )));
    }
    if nx == 0.0 {
        return Ok((vec![0.0; y], 0.0));
    }
    let weights: Vec<f64> = alpha.iter().map(|&a| a.exp()).collect();
    let eval = |m0: f64| -> f64 {
        m0 + (0..y).map(|j| (m0 * weights[j]).clamp(lo[j], hi[j])).sum::<f64>()
    };

    let (mut a, mut b) = (0.0f64, nx);
    for _ in 0..BISECT_CAP {
        if b - a <= BISECT_TOL {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break; // floating point exhausted
        }
        if eval(mid) < nx {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut root = 0.5 * (a + b);

    // Exact solve on the clamp pattern at the current root: free routes
    // contribute slope e^alpha, clamped routes a constant. The pattern
    // stabilizes within a couple of rounds because bisection already
    // brackets the right linear piece.
    for _ in 0..3 {
        let mut fixed = 0.0;
        let mut slope = 1.0;
        for j in 0..y {
            let raw = root * weights[j];
            if raw < lo[j] {
                fixed += lo[j];
            } else if raw > hi[j] {
                fixed += hi[j];
            } else {
                slope += weights[j];
            }
        }
        let candidate = ((nx - fixed) / slope).clamp(0.0, nx);
        if !candidate.is_finite() || (eval(candidate) - nx).abs() >= (eval(root) - nx).abs() {
            break;
        }
        root = candidate;
    }

    let residual = (eval(root) - nx).abs();
    if residual > 1e-9 * nx.max(1.0) {
        return Err(Error::Integrity(format!("logit row equation residual {residual:e}")));
    }
    let mu: Vec<f64> = (0..y).map(|j| (root * weights[j]).clamp(lo[j], hi[j])).collect();
    Ok((mu, root))
}

/// Capped logit demand row by row; returns the pair masses and the
/// unmatched mass `mu_x0` per row.
pub fn logit_constrained_demand(
    alpha: &Matrix,
    mu_bar: &Matrix,
    n: &[f64],
) -> Result<(Matrix, Vec<f64>)> {
    let zeros = Matrix::zeros(alpha.rows(), alpha.cols());
    logit_demand_boxed(alpha, mu_bar, &zeros, n)
}

/// Doubly constrained logit demand `lo <= mu <= hi`.
pub fn logit_demand_boxed(
    alpha: &Matrix,
    hi: &Matrix,
    lo: &Matrix,
    n: &[f64],
) -> Result<(Matrix, Vec<f64>)> {
    alpha.require_same_shape(hi, "logit demand cap")?;
    alpha.require_same_shape(lo, "logit demand floor")?;
    if n.len() != alpha.rows() {
        return Err(Error::Shape("mass vector length does not match alpha rows".into()));
    }
    no_plus_inf(alpha, "logit utilities")?;
    let (rows, cols) = alpha.shape();
    let mut mu = Matrix::zeros(rows, cols);
    let mut mu_x0 = vec![0.0; rows];
    for x in 0..rows {
        let a = &alpha.as_slice()[x * cols..(x + 1) * cols];
        let h: Vec<f64> = (0..cols).map(|j| hi[(x, j)].max(0.0)).collect();
        let l: Vec<f64> = (0..cols).map(|j| lo[(x, j)].max(0.0).min(h[j])).collect();
        let (row, m0) = logit_row_solve(a, &l, &h, n[x])?;
        for j in 0..cols {
            mu[(x, j)] = row[j];
        }
        mu_x0[x] = m0;
    }
    Ok((mu, mu_x0))
}

/// Cap multipliers `tau_xy = max(0, alpha_xy + log(mu_x0 / mu_bar_xy))`,
/// `+inf` where a zero cap shuts a route with `mu_x0 > 0`.
pub fn logit_multipliers(alpha: &Matrix, mu_bar: &Matrix, n: &[f64]) -> Result<Matrix> {
    let (_, mu_x0) = logit_constrained_demand(alpha, mu_bar, n)?;
    let (rows, cols) = alpha.shape();
    let mut tau = Matrix::zeros(rows, cols);
    for x in 0..rows {
        for j in 0..cols {
            let cap = mu_bar[(x, j)].max(0.0);
            tau[(x, j)] = if mu_x0[x] == 0.0 {
                0.0
            } else if cap == 0.0 {
                f64::INFINITY
            } else {
                (alpha[(x, j)] + (mu_x0[x] / cap).ln()).max(0.0)
            };
        }
    }
    Ok(tau)
}

/// Closed-form logit welfare for one side. `x_side` aggregates rows with
/// masses `n`; `y_side` aggregates columns with masses `m` by transposing
/// in and out.
#[derive(Debug, Clone)]
pub struct LogitWelfare {
    masses: Vec<f64>,
    rows: usize,
    cols: usize,
    by_rows: bool,
}

impl LogitWelfare {
    pub fn x_side(n: Vec<f64>, cols: usize) -> Result<Self> {
        Self::validate(&n)?;
        Ok(Self { rows: n.len(), cols, masses: n, by_rows: true })
    }

    pub fn y_side(m: Vec<f64>, rows: usize) -> Result<Self> {
        Self::validate(&m)?;
        Ok(Self { rows, cols: m.len(), masses: m, by_rows: false })
    }

    fn validate(masses: &[f64]) -> Result<()> {
        if masses.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("masses must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn oriented(&self, m: &Matrix) -> Matrix {
        if self.by_rows {
            m.clone()
        } else {
            m.transpose()
        }
    }

    fn restore(&self, m: Matrix) -> Matrix {
        if self.by_rows {
            m
        } else {
            m.transpose()
        }
    }
}

impl Welfare for LogitWelfare {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn value(&self, u: &Matrix) -> Result<f64> {
        require_shape(self, u, "logit value")?;
        logit_value(&self.oriented(u), &self.masses)
    }

    fn conjugate(&self, mu: &Matrix) -> Result<f64> {
        require_shape(self, mu, "logit conjugate")?;
        logit_conjugate(&self.oriented(mu), &self.masses)
    }

    fn demand_cap(&self) -> Matrix {
        if self.by_rows {
            Matrix::from_fn(self.rows, self.cols, |i, _| self.masses[i])
        } else {
            Matrix::from_fn(self.rows, self.cols, |_, j| self.masses[j])
        }
    }

    fn constrained_demand(&self, alpha: &Matrix, hi: &Matrix, lo: &Matrix) -> Result<Matrix> {
        require_shape(self, alpha, "logit demand")?;
        alpha.require_same_shape(hi, "logit demand cap")?;
        alpha.require_same_shape(lo, "logit demand floor")?;
        let (mu, _) = logit_demand_boxed(
            &self.oriented(alpha),
            &self.oriented(hi),
            &self.oriented(lo),
            &self.masses,
        )?;
        Ok(self.restore(mu))
    }

    fn multipliers(&self, alpha: &Matrix, hi: &Matrix) -> Result<Matrix> {
        require_shape(self, alpha, "logit multipliers")?;
        alpha.require_same_shape(hi, "logit multipliers cap")?;
        let tau = logit_multipliers(&self.oriented(alpha), &self.oriented(hi), &self.masses)?;
        Ok(self.restore(tau))
    }
}

// ---------------------------------------------------------------------------
// Quadratic conjugate welfare.

/// Welfare with `G*(mu) = vec(mu)' A vec(mu) / 2` on the box `[0, cap]`;
/// pairs are flattened row-major.
#[derive(Debug, Clone)]
pub struct QuadraticWelfare {
    a: Vec<f64>,
    cap: Matrix,
}

impl QuadraticWelfare {
    pub fn new(a: Vec<f64>, cap: Matrix) -> Result<Self> {
        let k = cap.len();
        if a.len() != k * k {
            return Err(Error::Shape(format!(
                "coefficient matrix of {} entries for {k} pairs",
                a.len()
            )));
        }
        if !is_symmetric(&a, k, 1e-9) {
            return Err(Error::Domain("coefficient matrix must be symmetric".into()));
        }
        if !crate::lcp::is_positive_definite(&a, k) {
            return Err(Error::Domain("coefficient matrix must be positive definite".into()));
        }
        if cap.as_slice().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("cap entries must be finite and nonnegative".into()));
        }
        Ok(Self { a, cap })
    }

    /// Demand over the box with `-inf` utilities locking a coordinate at
    /// its floor.
    fn boxed_argmax(&self, alpha: &Matrix, hi: &Matrix, lo: &Matrix) -> Result<Vec<f64>> {
        let k = self.cap.len();
        let mut lo_v = Vec::with_capacity(k);
        let mut hi_v = Vec::with_capacity(k);
        let mut a_v = Vec::with_capacity(k);
        for i in 0..k {
            let floor = lo.as_slice()[i].max(0.0);
            let ceil = hi.as_slice()[i].min(self.cap.as_slice()[i]).max(floor);
            let util = alpha.as_slice()[i];
            if util == f64::NEG_INFINITY {
                lo_v.push(floor);
                hi_v.push(floor);
                a_v.push(0.0);
            } else {
                lo_v.push(floor);
                hi_v.push(ceil);
                a_v.push(util);
            }
        }
        box_qp_argmax(&self.a, &a_v, &lo_v, &hi_v)
    }
}

impl Welfare for QuadraticWelfare {
    fn shape(&self) -> (usize, usize) {
        self.cap.shape()
    }

    fn value(&self, u: &Matrix) -> Result<f64> {
        require_shape(self, u, "quadratic value")?;
        no_plus_inf(u, "quadratic utilities")?;
        let zeros = Matrix::zeros(u.rows(), u.cols());
        let mu = self.boxed_argmax(u, &self.cap, &zeros)?;
        let k = self.cap.len();
        Ok(ext_dot(&mu, u.as_slice()) - 0.5 * quad_form(&self.a, k, &mu))
    }

    fn conjugate(&self, mu: &Matrix) -> Result<f64> {
        require_shape(self, mu, "quadratic conjugate")?;
        let k = self.cap.len();
        let tol = 1e-12 * self.cap.sup_norm().max(1.0);
        for i in 0..k {
            let v = mu.as_slice()[i];
            if v < -tol || v > self.cap.as_slice()[i] + tol {
                return Ok(f64::INFINITY);
            }
        }
        Ok(0.5 * quad_form(&self.a, k, mu.as_slice()))
    }

    fn demand_cap(&self) -> Matrix {
        self.cap.clone()
    }

    fn constrained_demand(&self, alpha: &Matrix, hi: &Matrix, lo: &Matrix) -> Result<Matrix> {
        require_shape(self, alpha, "quadratic demand")?;
        alpha.require_same_shape(hi, "quadratic demand cap")?;
        alpha.require_same_shape(lo, "quadratic demand floor")?;
        let mu = self.boxed_argmax(alpha, hi, lo)?;
        Matrix::new(alpha.rows(), alpha.cols(), mu)
    }

    fn multipliers(&self, alpha: &Matrix, hi: &Matrix) -> Result<Matrix> {
        require_shape(self, alpha, "quadratic multipliers")?;
        alpha.require_same_shape(hi, "quadratic multipliers cap")?;
        let zeros = Matrix::zeros(alpha.rows(), alpha.cols());
        let mu = self.boxed_argmax(alpha, hi, &zeros)?;
        let k = self.cap.len();
        let grad = matvec(&self.a, k, &mu);
        let bind_tol = 1e-9 * self.cap.sup_norm().max(1.0);
        let mut tau = vec![0.0; k];
        for i in 0..k {
            let util = alpha.as_slice()[i];
            // The multiplier prices the `hi` constraint only; at the
            // conjugate domain cap the normal cone is unbounded and the inf
            // selection is 0.
            let at_hi = mu[i] >= hi.as_slice()[i] - bind_tol;
            let at_dom = mu[i] >= self.cap.as_slice()[i] - bind_tol;
            if util.is_finite() && at_hi && !at_dom {
                tau[i] = (util - grad[i]).max(0.0);
            }
        }
        Matrix::new(alpha.rows(), alpha.cols(), tau)
    }
}

// ---------------------------------------------------------------------------
// Grid oracle welfare.

/// Welfare defined by a sampled conjugate; every operation is an exhaustive
/// search over the lattice. The intended use is as an independent oracle on
/// tiny markets.
#[derive(Debug, Clone)]
pub struct GridWelfare {
    gstar: GridFunction,
    cap: Matrix,
}

/// Wrap a sampled conjugate (over flattened pair space, row-major) into a
/// welfare function with domain inside `[0, cap]`.
pub fn grid_welfare_from_conjugate(gstar: GridFunction, cap: Matrix) -> Result<GridWelfare> {
    if gstar.dim() != cap.len() {
        return Err(Error::Shape(format!(
            "conjugate grid is {}-dimensional for {} pairs",
            gstar.dim(),
            cap.len()
        )));
    }
    if gstar.num_nodes() > GRID_BUDGET {
        return Err(Error::Size(format!(
            "conjugate grid has {} nodes, over the {GRID_BUDGET} budget",
            gstar.num_nodes()
        )));
    }
    let zero = vec![0.0; gstar.dim()];
    let at_zero = gstar.value(gstar.locate(&zero, 1e-9).map_err(|_| {
        Error::Domain("conjugate grid must sample the zero matching".into())
    })?);
    if !at_zero.is_finite() {
        return Err(Error::Domain("conjugate must be finite at the zero matching".into()));
    }
    for (c, axis) in gstar.axes().iter().enumerate() {
        if axis[0] < -1e-12 {
            return Err(Error::Domain(format!("axis {c} reaches below zero mass")));
        }
        if axis[axis.len() - 1] > cap.as_slice()[c] + 1e-9 {
            return Err(Error::Domain(format!("axis {c} reaches beyond the cap")));
        }
    }
    Ok(GridWelfare { gstar, cap })
}

impl GridWelfare {
    fn search(
        &self,
        score: impl Fn(&[f64]) -> f64,
        feasible: impl Fn(&[f64]) -> bool,
    ) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let d = self.gstar.dim();
        let mut point = vec![0.0; d];
        let mut multi = vec![0usize; d];
        for flat in 0..self.gstar.num_nodes() {
            let g = self.gstar.value(flat);
            if !g.is_finite() {
                continue;
            }
            self.gstar.multi_index(flat, &mut multi);
            self.gstar.point_of(&multi, &mut point);
            if !feasible(&point) {
                continue;
            }
            let s = score(&point) - g;
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((flat, s));
            }
        }
        best
    }
}

impl Welfare for GridWelfare {
    fn shape(&self) -> (usize, usize) {
        self.cap.shape()
    }

    fn value(&self, u: &Matrix) -> Result<f64> {
        require_shape(self, u, "grid value")?;
        no_plus_inf(u, "grid utilities")?;
        let (_, v) = self
            .search(|p| ext_dot(p, u.as_slice()), |_| true)
            .expect("conjugate domain is nonempty by construction");
        Ok(v)
    }

    fn conjugate(&self, mu: &Matrix) -> Result<f64> {
        require_shape(self, mu, "grid conjugate")?;
        // Off-lattice points count as outside the domain.
        match self.gstar.locate(mu.as_slice(), 1e-9) {
            Ok(flat) => Ok(self.gstar.value(flat)),
            Err(_) => Ok(f64::INFINITY),
        }
    }

    fn demand_cap(&self) -> Matrix {
        self.cap.clone()
    }

    fn constrained_demand(&self, alpha: &Matrix, hi: &Matrix, lo: &Matrix) -> Result<Matrix> {
        require_shape(self, alpha, "grid demand")?;
        alpha.require_same_shape(hi, "grid demand cap")?;
        alpha.require_same_shape(lo, "grid demand floor")?;
        let d = self.gstar.dim();
        let within = |p: &[f64]| {
            (0..d).all(|c| {
                p[c] >= lo.as_slice()[c] - 1e-9 && p[c] <= hi.as_slice()[c] + 1e-9
            })
        };
        let best = self
            .search(|p| ext_dot(p, alpha.as_slice()), within)
            .ok_or_else(|| Error::Domain("no lattice point inside the demand box".into()))?;
        Matrix::new(alpha.rows(), alpha.cols(), self.gstar.node_point(best.0))
    }

    fn multipliers(&self, alpha: &Matrix, hi: &Matrix) -> Result<Matrix> {
        require_shape(self, alpha, "grid multipliers")?;
        alpha.require_same_shape(hi, "grid multipliers cap")?;
        let zeros = Matrix::zeros(alpha.rows(), alpha.cols());
        let mu = self.constrained_demand(alpha, hi, &zeros)?;
        let flat = self.gstar.locate(mu.as_slice(), 1e-9)?;
        let d = self.gstar.dim();
        let mut multi = vec![0usize; d];
        self.gstar.multi_index(flat, &mut multi);
        let lens = self.gstar.lens();
        let steps: Vec<f64> = (0..d)
            .map(|c| {
                let axis = &self.gstar.axes()[c];
                if multi[c] + 1 < lens[c] {
                    axis[multi[c] + 1] - axis[multi[c]]
                } else {
                    0.0
                }
            })
            .collect();
        let bind_tol = 1e-9 * self.cap.sup_norm().max(1.0);
        let mut tau = vec![0.0; d];
        for c in 0..d {
            if mu.as_slice()[c] < hi.as_slice()[c] - bind_tol {
                continue; // cap slack
            }
            // Smallest tau with alpha - tau inside the right slope of G*:
            // tau = (alpha - forward difference)^+; a missing or infinite
            // neighbor means the domain ends and the cap needs no price.
            if multi[c] + 1 >= lens[c] {
                continue;
            }
            let mut up = multi.clone();
            up[c] += 1;
            let next = self.gstar.value(self.gstar.flat_index(&up));
            if !next.is_finite() {
                continue;
            }
            let slope = (next - self.gstar.value(flat)) / steps[c];
            let util = alpha.as_slice()[c];
            if util.is_finite() {
                tau[c] = (util - slope).max(0.0);
            }
        }
        Matrix::new(alpha.rows(), alpha.cols(), tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn logit_value_examples() {
        let n = [1.0];
        let zero = Matrix::zeros(1, 1);
        assert!((logit_value(&zero, &n).unwrap() - LN2).abs() <= 1e-15);

        let closed = Matrix::constant(1, 2, f64::NEG_INFINITY);
        assert_eq!(logit_value(&closed, &n).unwrap(), 0.0);

        let two = Matrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        let want = 3.0 * (1.0 + 1f64.exp() + 2f64.exp()).ln();
        let got = logit_value(&two, &[3.0]).unwrap();
        assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
        assert!((got - 7.22281789333314).abs() <= 1e-10);
    }

    #[test]
    fn logit_value_shift_matches_naive_on_large_utilities() {
        let big = Matrix::new(1, 2, vec![800.0, 799.0]).unwrap();
        let v = logit_value(&big, &[1.0]).unwrap();
        // log(e^800 + e^799 + 1) = 800 + log(1 + e^-1 + e^-800).
        let want = 800.0 + (-1f64).exp().ln_1p();
        assert!(v.is_finite());
        assert!((v - want).abs() <= 1e-9, "{v} vs {want}");
    }

    #[test]
    fn logit_demand_slack_and_binding_caps() {
        let alpha = Matrix::zeros(1, 1);
        let n = [1.0];
        let (mu, mu_x0) =
            logit_constrained_demand(&alpha, &Matrix::constant(1, 1, 10.0), &n).unwrap();
        assert!((mu[(0, 0)] - 0.5).abs() <= 1e-12);
        assert!((mu_x0[0] - 0.5).abs() <= 1e-12);

        let (mu, mu_x0) =
            logit_constrained_demand(&alpha, &Matrix::constant(1, 1, 0.25), &n).unwrap();
        assert!((mu[(0, 0)] - 0.25).abs() <= 1e-12);
        assert!((mu_x0[0] - 0.75).abs() <= 1e-12);

        // A zero cap forces zero demand and the rest of the row adjusts.
        let alpha2 = Matrix::zeros(1, 2);
        let caps = Matrix::new(1, 2, vec![0.0, 10.0]).unwrap();
        let (mu, mu_x0) = logit_constrained_demand(&alpha2, &caps, &n).unwrap();
        assert_eq!(mu[(0, 0)], 0.0);
        assert!((mu[(0, 1)] - 0.5).abs() <= 1e-12);
        assert!((mu_x0[0] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn logit_row_residual_is_tiny() {
        let alpha = Matrix::new(2, 3, vec![0.3, -0.7, 1.0, 0.0, 0.2, -0.1]).unwrap();
        let caps = Matrix::new(2, 3, vec![0.2, 10.0, 0.05, 1.0, 0.0, 0.3]).unwrap();
        let n = [1.5, 0.8];
        let (mu, mu_x0) = logit_constrained_demand(&alpha, &caps, &n).unwrap();
        for x in 0..2 {
            let total = mu.row_sum(x) + mu_x0[x];
            assert!((total - n[x]).abs() <= ROW_RESIDUAL_TOL * n[x].max(1.0));
        }
    }

    #[test]
    fn logit_multiplier_examples() {
        let alpha = Matrix::zeros(1, 1);
        let n = [1.0];
        let slack = logit_multipliers(&alpha, &Matrix::constant(1, 1, 10.0), &n).unwrap();
        assert_eq!(slack[(0, 0)], 0.0);

        let binding = logit_multipliers(&alpha, &Matrix::constant(1, 1, 0.25), &n).unwrap();
        assert!((binding[(0, 0)] - 3.0f64.ln()).abs() <= 1e-12);

        let shut = logit_multipliers(&alpha, &Matrix::zeros(1, 1), &n).unwrap();
        assert_eq!(shut[(0, 0)], f64::INFINITY);

        // A massless row prices nothing.
        let none = logit_multipliers(&alpha, &Matrix::zeros(1, 1), &[0.0]).unwrap();
        assert_eq!(none[(0, 0)], 0.0);
    }

    #[test]
    fn logit_lower_bound_binds_by_water_filling() {
        let alpha = Matrix::zeros(1, 1);
        let hi = Matrix::constant(1, 1, 1.0);
        let lo = Matrix::constant(1, 1, 0.7);
        let (mu, mu_x0) = logit_demand_boxed(&alpha, &hi, &lo, &[1.0]).unwrap();
        assert!((mu[(0, 0)] - 0.7).abs() <= 1e-12);
        assert!((mu_x0[0] - 0.3).abs() <= 1e-12);
    }

    #[test]
    fn logit_demand_is_homogeneous_in_masses_and_caps() {
        let alpha = Matrix::new(1, 2, vec![0.4, -0.3]).unwrap();
        let caps = Matrix::new(1, 2, vec![0.3, 5.0]).unwrap();
        let (mu1, m01) = logit_constrained_demand(&alpha, &caps, &[1.2]).unwrap();
        let scaled = caps.map(|v| 7.0 * v);
        let (mu7, m07) = logit_constrained_demand(&alpha, &scaled, &[8.4]).unwrap();
        for j in 0..2 {
            assert!((7.0 * mu1[(0, j)] - mu7[(0, j)]).abs() <= 1e-9);
        }
        assert!((7.0 * m01[0] - m07[0]).abs() <= 1e-9);
    }

    #[test]
    fn logit_fenchel_equality_at_demand() {
        let w = LogitWelfare::x_side(vec![1.0], 1).unwrap();
        let alpha = Matrix::zeros(1, 1);
        let mu = Matrix::constant(1, 1, 0.5);
        let r = welfare_fenchel_residual(&w, &alpha, &mu).unwrap();
        assert!(r.abs() <= 1e-9, "residual {r}");

        // Outside the domain the residual is infinite.
        let over = Matrix::constant(1, 1, 2.0);
        assert_eq!(welfare_fenchel_residual(&w, &alpha, &over).unwrap(), f64::INFINITY);

        // At a capped demand point with its multiplier, equality still
        // holds at the shifted utility.
        let cap = Matrix::constant(1, 1, 0.25);
        let tau = w.multipliers(&alpha, &cap).unwrap();
        let shifted = alpha.sub(&tau);
        let mu_c = w.constrained_demand(&alpha, &cap, &Matrix::zeros(1, 1)).unwrap();
        let r2 = welfare_fenchel_residual(&w, &shifted, &mu_c).unwrap();
        assert!(r2.abs() <= 1e-9, "residual {r2}");
    }

    #[test]
    fn y_side_logit_aggregates_columns() {
        let w = LogitWelfare::y_side(vec![2.0, 1.0], 1).unwrap();
        assert_eq!(w.shape(), (1, 2));
        assert_eq!(w.demand_cap().as_slice(), &[2.0, 1.0]);
        let gamma = Matrix::zeros(1, 2);
        let mu = w
            .constrained_demand(&gamma, &Matrix::constant(1, 2, 10.0), &Matrix::zeros(1, 2))
            .unwrap();
        // Each column is an independent one-route logit: mu = m / 2.
        assert!((mu[(0, 0)] - 1.0).abs() <= 1e-12);
        assert!((mu[(0, 1)] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn quadratic_welfare_round_trip() {
        let cap = Matrix::constant(1, 2, 2.0);
        let w = QuadraticWelfare::new(vec![2.0, 0.0, 0.0, 1.0], cap).unwrap();
        // Unconstrained argmax of <mu,u> - ||.||_A^2/2 is A^{-1} u.
        let u = Matrix::new(1, 2, vec![1.0, 1.0]).unwrap();
        let mu = w
            .constrained_demand(&u, &Matrix::constant(1, 2, 10.0), &Matrix::zeros(1, 2))
            .unwrap();
        assert!((mu[(0, 0)] - 0.5).abs() <= 1e-10);
        assert!((mu[(0, 1)] - 1.0).abs() <= 1e-10);
        // value = u' A^{-1} u / 2 here.
        let v = w.value(&u).unwrap();
        assert!((v - 0.75).abs() <= 1e-9);
        let r = welfare_fenchel_residual(&w, &u, &mu).unwrap();
        assert!(r.abs() <= 1e-8, "residual {r}");
    }

    #[test]
    fn quadratic_multipliers_price_only_binding_caps() {
        let cap = Matrix::constant(1, 2, 5.0);
        let w = QuadraticWelfare::new(vec![1.0, 0.0, 0.0, 1.0], cap).unwrap();
        let alpha = Matrix::new(1, 2, vec![2.0, 0.5]).unwrap();
        let hi = Matrix::new(1, 2, vec![1.0, 1.0]).unwrap();
        let tau = w.multipliers(&alpha, &hi).unwrap();
        // First coordinate wants 2.0, capped at 1.0: tau = 2 - 1 = 1.
        assert!((tau[(0, 0)] - 1.0).abs() <= 1e-9);
        assert_eq!(tau[(0, 1)], 0.0);
    }

    #[test]
    fn quadratic_conjugate_domain_is_the_box() {
        let cap = Matrix::constant(1, 1, 1.0);
        let w = QuadraticWelfare::new(vec![2.0], cap).unwrap();
        assert_eq!(w.conjugate(&Matrix::constant(1, 1, 0.5)).unwrap(), 0.25);
        assert_eq!(w.conjugate(&Matrix::constant(1, 1, 1.5)).unwrap(), f64::INFINITY);
        assert_eq!(w.conjugate(&Matrix::constant(1, 1, -0.5)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn degenerate_grid_welfare_demands_nothing() {
        // G* = indicator of {0}: sampled as 0 at mass 0, +inf elsewhere.
        let gstar = GridFunction::new(
            vec![vec![0.0, 0.5, 1.0]],
            vec![0.0, f64::INFINITY, f64::INFINITY],
        )
        .unwrap();
        let w = grid_welfare_from_conjugate(gstar, Matrix::constant(1, 1, 1.0)).unwrap();
        let u = Matrix::constant(1, 1, 3.0);
        assert_eq!(w.value(&u).unwrap(), 0.0);
        let mu = w
            .constrained_demand(&u, &Matrix::constant(1, 1, 1.0), &Matrix::zeros(1, 1))
            .unwrap();
        assert_eq!(mu[(0, 0)], 0.0);
    }

    #[test]
    fn grid_welfare_matches_logit_value() {
        // Entropy conjugate of the 1x1 unit-mass logit sampled on 400
        // points.
        let xlogx = |v: f64| if v <= 0.0 { 0.0 } else { v * v.ln() };
        let gstar = GridFunction::sample(vec![linspace(0.0, 1.0, 400)], |p| {
            xlogx(p[0]) + xlogx(1.0 - p[0])
        })
        .unwrap();
        let w = grid_welfare_from_conjugate(gstar, Matrix::constant(1, 1, 1.0)).unwrap();
        for &a in &[0.0, 0.4, -0.8] {
            let u = Matrix::constant(1, 1, a);
            let grid_v = w.value(&u).unwrap();
            let logit_v = logit_value(&u, &[1.0]).unwrap();
            assert!((grid_v - logit_v).abs() <= 2e-3, "alpha={a}: {grid_v} vs {logit_v}");
        }
    }

    #[test]
    fn grid_demand_with_slack_cap_is_the_unconstrained_argmax() {
        let gstar =
            GridFunction::sample(vec![linspace(0.0, 1.0, 101)], |p| p[0] * p[0]).unwrap();
        let w = grid_welfare_from_conjugate(gstar, Matrix::constant(1, 1, 1.0)).unwrap();
        let alpha = Matrix::constant(1, 1, 1.0);
        // argmax mu - mu^2 on the lattice is mu = 0.5.
        let slack = w
            .constrained_demand(&alpha, &Matrix::constant(1, 1, 1.0), &Matrix::zeros(1, 1))
            .unwrap();
        assert!((slack[(0, 0)] - 0.5).abs() <= 1e-12);
        // A binding cap clips it and earns a positive multiplier.
        let tight = w
            .constrained_demand(&alpha, &Matrix::constant(1, 1, 0.2), &Matrix::zeros(1, 1))
            .unwrap();
        assert!((tight[(0, 0)] - 0.2).abs() <= 1e-12);
        let tau = w.multipliers(&alpha, &Matrix::constant(1, 1, 0.2)).unwrap();
        assert!(tau[(0, 0)] > 0.0);
        // KKT certificate: mu is the subgradient selection at alpha - tau.
        let shifted = alpha.sub(&tau);
        let r = welfare_fenchel_residual(&w, &shifted, &tight).unwrap();
        assert!(r.abs() <= 1e-2, "within one lattice step: {r}");
    }

    #[test]
    fn grid_welfare_validates_its_domain() {
        let bad_axis = GridFunction::new(vec![vec![-0.5, 0.0, 0.5]], vec![0.0, 0.0, 0.0]);
        assert!(grid_welfare_from_conjugate(
            bad_axis.unwrap(),
            Matrix::constant(1, 1, 1.0)
        )
        .is_err());
        let no_zero = GridFunction::new(vec![vec![0.25, 0.5]], vec![0.0, 0.0]).unwrap();
        assert!(grid_welfare_from_conjugate(no_zero, Matrix::constant(1, 1, 1.0)).is_err());
    }
}
