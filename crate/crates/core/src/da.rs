//! Aggregated deferred acceptance over welfare functions.
//!
//! One side proposes pair masses up to an availability cap, the other
//! disposes of what it does not want, and the cap is reduced by the
//! rejected amount (or reset to the accepted amount, in the Alkan-Gale
//! variant). The iterate trace is kept in full so the monotonicity
//! invariants that drive the convergence proof can be asserted after the
//! fact, and the limit is certified directly as a generalized equilibrium
//! rather than trusting the path.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::model::{EquilibriumOutcome, Matching};
use crate::welfare::{welfare_fenchel_residual, Welfare};
use crate::{Error, Result};

/// Mid-run Fenchel residual above this aborts with an integrity error: the
/// welfare instance is not honoring its own optimality contract.
pub const INTEGRITY_TOL: f64 = 1e-6;
/// Slack for the entrywise chain `0 <= mu_T <= mu_P <= mu_A` (grid-backed
/// demands may overshoot a cap by their locate window).
const CHAIN_SLACK: f64 = 1e-9;
/// Slack for multiplier monotonicity across iterations.
const TAU_SLACK: f64 = 1e-11;
/// Slack for the telescoping identity on subtractive traces.
const TELESCOPE_SLACK: f64 = 1e-12;

/// Cap update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// `mu_A <- mu_A - (mu_P - mu_T)`.
    Subtractive,
    /// `mu_A <- mu_T` where a rejection occurred, unchanged elsewhere.
    AlkanGale,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DaOptions {
    pub tol_stop: f64,
    pub max_iter: usize,
    pub update_rule: UpdateRule,
    pub seed: u64,
}

impl Default for DaOptions {
    fn default() -> Self {
        Self { tol_stop: 1e-10, max_iter: 100_000, update_rule: UpdateRule::Subtractive, seed: 0 }
    }
}

impl DaOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_stop > 0.0) || !self.tol_stop.is_finite() {
            return Err(Error::Domain("stopping tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationCap,
}

/// One recorded iteration: the availability cap, the proposal, the kept
/// masses after disposal, both multiplier matrices, and the sup-norm gap.
#[derive(Debug, Clone, Serialize)]
pub struct DaIterate {
    pub mu_a: Matrix,
    pub mu_p: Matrix,
    pub mu_t: Matrix,
    pub tau_p: Matrix,
    pub tau_t: Matrix,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DaTrace {
    pub options: DaOptions,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
    pub iterates: Vec<DaIterate>,
}

fn subtractive_next(mu_a: &Matrix, mu_p: &Matrix, mu_t: &Matrix) -> Matrix {
    mu_a.sub(&mu_p.sub(mu_t))
}

fn alkan_gale_next(mu_a: &Matrix, mu_p: &Matrix, mu_t: &Matrix) -> Matrix {
    Matrix::from_fn(mu_a.rows(), mu_a.cols(), |i, j| {
        if mu_t[(i, j)] < mu_p[(i, j)] {
            mu_t[(i, j)]
        } else {
            mu_a[(i, j)]
        }
    })
}

fn check_shapes(
    g: &dyn Welfare,
    h: &dyn Welfare,
    alpha: &Matrix,
    gamma: &Matrix,
) -> Result<(usize, usize)> {
    let shape = g.shape();
    if h.shape() != shape || alpha.shape() != shape || gamma.shape() != shape {
        return Err(Error::Shape(format!(
            "sides and utilities disagree: G {:?}, H {:?}, alpha {:?}, gamma {:?}",
            g.shape(),
            h.shape(),
            alpha.shape(),
            gamma.shape()
        )));
    }
    Ok(shape)
}

fn drive(
    g: &dyn Welfare,
    h: &dyn Welfare,
    alpha: &Matrix,
    gamma: &Matrix,
    cap_init: Matrix,
    opts: &DaOptions,
) -> Result<DaTrace> {
    opts.validate()?;
    let (rows, cols) = check_shapes(g, h, alpha, gamma)?;
    let zeros = Matrix::zeros(rows, cols);
    let scale = cap_init.sup_norm().max(1.0);
    let mut mu_a = cap_init;
    let mut lo = zeros.clone();
    let mut iterates = Vec::new();
    let mut termination = Termination::IterationCap;

    for _ in 0..opts.max_iter {
        let mu_p = g.constrained_demand(alpha, &mu_a, &lo)?;
        let tau_p = g.multipliers(alpha, &mu_a)?;
        // Entrywise clamp: disposal must never exceed the proposal, and the
        // exact inequality keeps later invariants sharp.
        let mu_t = h.constrained_demand(gamma, &mu_p, &zeros)?.emin(&mu_p);
        let tau_t = h.multipliers(gamma, &mu_p)?;

        let disposal_gap = welfare_fenchel_residual(h, &gamma.sub(&tau_t), &mu_t)?;
        if !(disposal_gap <= INTEGRITY_TOL) {
            return Err(Error::Integrity(format!(
                "disposal Fenchel residual {disposal_gap:e} at iteration {}",
                iterates.len()
            )));
        }
        // The proposal certificate prices only the upper cap, so it is
        // conclusive only while the carried lower bound is slack.
        let lo_slack = (0..rows * cols).all(|i| {
            lo.as_slice()[i] <= 1e-12 * scale
                || mu_p.as_slice()[i] >= lo.as_slice()[i] + CHAIN_SLACK * scale
        });
        if lo_slack {
            let proposal_gap = welfare_fenchel_residual(g, &alpha.sub(&tau_p), &mu_p)?;
            if !(proposal_gap <= INTEGRITY_TOL) {
                return Err(Error::Integrity(format!(
                    "proposal Fenchel residual {proposal_gap:e} at iteration {}",
                    iterates.len()
                )));
            }
        }

        let residual = mu_p.sup_diff(&mu_t);
        let done = residual <= opts.tol_stop;
        iterates.push(DaIterate {
            mu_a: mu_a.clone(),
            mu_p: mu_p.clone(),
            mu_t: mu_t.clone(),
            tau_p,
            tau_t,
            residual,
        });
        if done {
            termination = Termination::Converged;
            break;
        }
        match opts.update_rule {
            UpdateRule::Subtractive => {
                mu_a = subtractive_next(&mu_a, &mu_p, &mu_t);
                lo = mu_t;
            }
            UpdateRule::AlkanGale => {
                mu_a = alkan_gale_next(&mu_a, &mu_p, &mu_t);
            }
        }
    }

    Ok(DaTrace {
        options: opts.clone(),
        converged: termination == Termination::Converged,
        iterations: iterates.len(),
        termination,
        iterates,
    })
}

/// Run deferred acceptance from the natural initial cap
/// `min(n^G, n^H)` entrywise.
pub fn run_da(
    g: &dyn Welfare,
    h: &dyn Welfare,
    alpha: &Matrix,
    gamma: &Matrix,
    opts: &DaOptions,
) -> Result<DaTrace> {
    check_shapes(g, h, alpha, gamma)?;
    let cap = g.demand_cap().emin(&h.demand_cap());
    drive(g, h, alpha, gamma, cap, opts)
}

/// Alkan-Gale variant: the welfare objects supply the two choice maps
/// (their constrained demands), `cap0` overrides the initial cap.
pub fn run_alkan_gale(
    g: &dyn Welfare,
    h: &dyn Welfare,
    alpha: &Matrix,
    gamma: &Matrix,
    cap0: Option<&Matrix>,
    opts: &DaOptions,
) -> Result<DaTrace> {
    check_shapes(g, h, alpha, gamma)?;
    let natural = g.demand_cap().emin(&h.demand_cap());
    let cap = match cap0 {
        Some(c) => {
            natural.require_same_shape(c, "initial cap")?;
            if c.as_slice().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Domain("initial cap must be finite and nonnegative".into()));
            }
            c.emin(&natural)
        }
        None => natural,
    };
    let ag_opts = DaOptions { update_rule: UpdateRule::AlkanGale, ..opts.clone() };
    drive(g, h, alpha, gamma, cap, &ag_opts)
}

/// Pull the equilibrium out of a converged trace: zero the multipliers on
/// saturated routes and shift the utilities.
pub fn extract_equilibrium(
    trace: &DaTrace,
    g: &dyn Welfare,
    h: &dyn Welfare,
    alpha: &Matrix,
    gamma: &Matrix,
    n: &[f64],
    m: &[f64],
) -> Result<EquilibriumOutcome> {
    if !trace.converged {
        return Err(Error::State("cannot extract from a non-converged trace".into()));
    }
    let last = trace
        .iterates
        .last()
        .ok_or_else(|| Error::State("converged trace holds no iterations".into()))?;
    let mu = last.mu_t.clone();
    let cap_g = g.demand_cap();
    let cap_h = h.demand_cap();
    let eps_g = CHAIN_SLACK * cap_g.sup_norm().max(1.0);
    let eps_h = CHAIN_SLACK * cap_h.sup_norm().max(1.0);
    // A route saturated for a side cannot be priced by it: the cap there is
    // the side's own capacity, not scarcity of partners.
    let tau_alpha =
        Matrix::from_fn(mu.rows(), mu.cols(), |i, j| {
            if mu[(i, j)] < cap_g[(i, j)] - eps_g {
                last.tau_p[(i, j)]
            } else {
                0.0
            }
        });
    let tau_gamma =
        Matrix::from_fn(mu.rows(), mu.cols(), |i, j| {
            if mu[(i, j)] < cap_h[(i, j)] - eps_h {
                last.tau_t[(i, j)]
            } else {
                0.0
            }
        });
    let u = alpha.sub(&tau_alpha);
    let v = gamma.sub(&tau_gamma);
    let matching = Matching::from_mu(mu, n, m)?;
    let mut residuals = BTreeMap::new();
    residuals.insert("stop".to_string(), last.residual);
    Ok(EquilibriumOutcome {
        matching,
        u,
        v,
        tau_alpha,
        tau_gamma,
        residuals,
        iterations: trace.iterations,
        converged: trace.converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    /// Worst violation of `min(tau_alpha, tau_gamma) = 0` with both
    /// multipliers nonnegative.
    pub blocking: f64,
    pub fenchel_g: f64,
    pub fenchel_h: f64,
    pub tol: f64,
}

/// Certify a generalized equilibrium: no blocking price pair, and Fenchel
/// equality of `mu` with the shifted utilities on both sides.
pub fn verify_generalized_equilibrium(
    out: &EquilibriumOutcome,
    g: &dyn Welfare,
    h: &dyn Welfare,
    alpha: &Matrix,
    gamma: &Matrix,
    tol: f64,
) -> Result<VerifyReport> {
    let shape = check_shapes(g, h, alpha, gamma)?;
    if out.matching.mu.shape() != shape {
        return Err(Error::Shape("outcome shape does not match the sides".into()));
    }
    let mut blocking = 0.0f64;
    for (&ta, &tg) in out.tau_alpha.as_slice().iter().zip(out.tau_gamma.as_slice()) {
        // min(+inf, 0) = 0 covers routes closed by one side and free on
        // the other.
        blocking = blocking.max(ta.min(tg)).max(-ta).max(-tg);
    }
    let fenchel_g = welfare_fenchel_residual(g, &out.u, &out.matching.mu)?;
    let fenchel_h = welfare_fenchel_residual(h, &out.v, &out.matching.mu)?;
    let pass = blocking <= tol && fenchel_g <= tol && fenchel_h <= tol;
    Ok(VerifyReport { pass, blocking, fenchel_g, fenchel_h, tol })
}

/// Worst violations of the monotonicity structure a valid trace must have.
/// Entries are positive parts: 0 means the invariant held exactly.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub pass: bool,
    /// Worst entrywise increase of the cap across iterations.
    pub cap_increase: f64,
    /// Worst negative cap entry (as a positive number).
    pub cap_negative: f64,
    /// Worst violation of `0 <= mu_T <= mu_P <= mu_A`.
    pub chain: f64,
    /// Worst violation of `mu_T(k-1) <= mu_P(k)` (subtractive runs only).
    pub carryover: f64,
    /// Worst entrywise decrease of `tau_P` across iterations.
    pub tau_p_decrease: f64,
    /// Worst entrywise increase of `tau_T` across iterations.
    pub tau_t_increase: f64,
    /// Worst mismatch between the stored next cap and the update formula.
    pub update_mismatch: f64,
    /// Gap in `sum_k (mu_P - mu_T) = mu_A(0) - mu_A(last)` (subtractive
    /// runs only).
    pub telescoping: f64,
    /// First iteration at which some check failed.
    pub witness: Option<usize>,
}

/// Violation of `a <= b` in the extended order; equal infinities count as
/// satisfied rather than NaN.
fn ext_violation(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

pub fn trace_invariants(trace: &DaTrace) -> InvariantReport {
    let mut report = InvariantReport {
        pass: true,
        cap_increase: 0.0,
        cap_negative: 0.0,
        chain: 0.0,
        carryover: 0.0,
        tau_p_decrease: 0.0,
        tau_t_increase: 0.0,
        update_mismatch: 0.0,
        telescoping: 0.0,
        witness: None,
    };
    let iters = &trace.iterates;
    if iters.is_empty() {
        return report;
    }
    let scale = iters[0].mu_a.sup_norm().max(1.0);
    let chain_slack = CHAIN_SLACK * scale;
    let subtractive = trace.options.update_rule == UpdateRule::Subtractive;
    let fail_at = |report_pass: &mut bool, witness: &mut Option<usize>, k: usize| {
        *report_pass = false;
        if witness.map_or(true, |w| k < w) {
            *witness = Some(k);
        }
    };

    for (k, it) in iters.iter().enumerate() {
        let mut worst_chain = 0.0f64;
        let mut worst_neg = 0.0f64;
        for i in 0..it.mu_a.len() {
            let (a, p, t) = (it.mu_a.as_slice()[i], it.mu_p.as_slice()[i], it.mu_t.as_slice()[i]);
            worst_neg = worst_neg.max(-a);
            worst_chain = worst_chain.max(t - p).max(p - a).max(-t);
        }
        report.cap_negative = report.cap_negative.max(worst_neg);
        report.chain = report.chain.max(worst_chain);
        if worst_neg > chain_slack || worst_chain > chain_slack {
            fail_at(&mut report.pass, &mut report.witness, k);
        }
    }

    for k in 1..iters.len() {
        let (prev, next) = (&iters[k - 1], &iters[k]);
        let mut cap_up = 0.0f64;
        let mut tau_p_down = 0.0f64;
        let mut tau_t_up = 0.0f64;
        let mut carry = 0.0f64;
        for i in 0..next.mu_a.len() {
            cap_up = cap_up.max(next.mu_a.as_slice()[i] - prev.mu_a.as_slice()[i]);
            tau_p_down =
                tau_p_down.max(ext_violation(prev.tau_p.as_slice()[i], next.tau_p.as_slice()[i]));
            tau_t_up =
                tau_t_up.max(ext_violation(next.tau_t.as_slice()[i], prev.tau_t.as_slice()[i]));
            if subtractive {
                carry = carry.max(prev.mu_t.as_slice()[i] - next.mu_p.as_slice()[i]);
            }
        }
        let stored_next = &next.mu_a;
        let recomputed = match trace.options.update_rule {
            UpdateRule::Subtractive => subtractive_next(&prev.mu_a, &prev.mu_p, &prev.mu_t),
            UpdateRule::AlkanGale => alkan_gale_next(&prev.mu_a, &prev.mu_p, &prev.mu_t),
        };
        let mismatch = stored_next.sup_diff(&recomputed);

        report.cap_increase = report.cap_increase.max(cap_up);
        report.tau_p_decrease = report.tau_p_decrease.max(tau_p_down);
        report.tau_t_increase = report.tau_t_increase.max(tau_t_up);
        report.carryover = report.carryover.max(carry);
        report.update_mismatch = report.update_mismatch.max(mismatch);
        if cap_up > chain_slack
            || tau_p_down > TAU_SLACK
            || tau_t_up > TAU_SLACK
            || carry > chain_slack
            || mismatch > 0.0
        {
            fail_at(&mut report.pass, &mut report.witness, k);
        }
    }

    if subtractive && iters.len() >= 2 {
        let last = iters.len() - 1;
        let mut gap = 0.0f64;
        for i in 0..iters[0].mu_a.len() {
            let mut acc = 0.0;
            for it in &iters[..last] {
                acc += it.mu_p.as_slice()[i] - it.mu_t.as_slice()[i];
            }
            let drop = iters[0].mu_a.as_slice()[i] - iters[last].mu_a.as_slice()[i];
            gap = gap.max((acc - drop).abs());
        }
        report.telescoping = gap;
        if gap > TELESCOPE_SLACK * scale {
            fail_at(&mut report.pass, &mut report.witness, last);
        }
    }

    report
}

/// JSON-lines trace export: a metadata line, then one line per iteration in
/// struct field order (stable across runs).
pub fn write_trace_jsonl<W: io::Write>(trace: &DaTrace, w: &mut W) -> io::Result<()> {
    #[derive(Serialize)]
    struct Meta<'a> {
        options: &'a DaOptions,
        converged: bool,
        iterations: usize,
        termination: &'a Termination,
    }
    serde_json::to_writer(
        &mut *w,
        &Meta {
            options: &trace.options,
            converged: trace.converged,
            iterations: trace.iterations,
            termination: &trace.termination,
        },
    )?;
    w.write_all(b"\n")?;
    for it in &trace.iterates {
        serde_json::to_writer(&mut *w, it)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::welfare::{LogitWelfare, QuadraticWelfare};

    fn unit_logit_pair(rows: usize, cols: usize) -> (LogitWelfare, LogitWelfare) {
        let g = LogitWelfare::x_side(vec![1.0; rows], cols).unwrap();
        let h = LogitWelfare::y_side(vec![1.0; cols], rows).unwrap();
        (g, h)
    }

    fn solve_and_verify(
        g: &dyn Welfare,
        h: &dyn Welfare,
        alpha: &Matrix,
        gamma: &Matrix,
        n: &[f64],
        m: &[f64],
    ) -> (DaTrace, EquilibriumOutcome, VerifyReport) {
        let trace = run_da(g, h, alpha, gamma, &DaOptions::default()).unwrap();
        assert!(trace.converged, "no convergence in {} iterations", trace.iterations);
        let out = extract_equilibrium(&trace, g, h, alpha, gamma, n, m).unwrap();
        let report = verify_generalized_equilibrium(&out, g, h, alpha, gamma, 1e-6).unwrap();
        (trace, out, report)
    }

    #[test]
    fn empty_market_converges_immediately() {
        let g = LogitWelfare::x_side(vec![], 0).unwrap();
        let h = LogitWelfare::y_side(vec![], 0).unwrap();
        let a = Matrix::zeros(0, 0);
        let (trace, out, report) = solve_and_verify(&g, &h, &a, &a, &[], &[]);
        assert_eq!(trace.iterations, 1);
        assert!(out.matching.mu.is_empty());
        assert!(report.pass);
        assert!(trace_invariants(&trace).pass);
    }

    #[test]
    fn symmetric_unit_market_splits_in_half() {
        let (g, h) = unit_logit_pair(1, 1);
        let zero = Matrix::zeros(1, 1);
        let (trace, out, report) = solve_and_verify(&g, &h, &zero, &zero, &[1.0], &[1.0]);
        // Both sides want exactly half at slack caps, so the first round
        // already agrees: mu = mu_x0 = mu_0y = 1/2.
        let mu = out.matching.mu[(0, 0)];
        assert!((mu - 0.5).abs() <= 1e-9, "mu = {mu}");
        assert!((out.matching.mu_x0[0] - 0.5).abs() <= 1e-9);
        assert!((out.matching.mu_0y[0] - 0.5).abs() <= 1e-9);
        assert_eq!(out.tau_alpha[(0, 0)], 0.0);
        assert_eq!(out.tau_gamma[(0, 0)], 0.0);
        assert_eq!(out.u[(0, 0)], 0.0);
        assert_eq!(out.v[(0, 0)], 0.0);
        assert!(report.pass);
        assert!(trace_invariants(&trace).pass);
    }

    #[test]
    fn scarce_receivers_price_the_proposing_side() {
        // n = 1 chases m = 0.05: the y side is scarce, proposals get
        // rationed, and the positive multiplier lands on tau_alpha.
        let g = LogitWelfare::x_side(vec![1.0], 1).unwrap();
        let h = LogitWelfare::y_side(vec![0.05], 1).unwrap();
        let zero = Matrix::zeros(1, 1);
        let (trace, out, report) = solve_and_verify(&g, &h, &zero, &zero, &[1.0], &[0.05]);
        let mu = out.matching.mu[(0, 0)];
        assert!((mu - 0.025).abs() <= 1e-9, "mu = {mu}");
        // tau_alpha = ln(mu_x0 / mu) = ln(0.975/0.025) = ln 39.
        assert!((out.tau_alpha[(0, 0)] - 39f64.ln()).abs() <= 1e-6);
        assert_eq!(out.tau_gamma[(0, 0)], 0.0);
        assert!(report.pass);
        let inv = trace_invariants(&trace);
        assert!(inv.pass, "{inv:?}");
    }

    #[test]
    fn scarce_proposers_price_the_disposing_side() {
        let g = LogitWelfare::x_side(vec![0.05], 1).unwrap();
        let h = LogitWelfare::y_side(vec![1.0], 1).unwrap();
        let zero = Matrix::zeros(1, 1);
        let (_, out, report) = solve_and_verify(&g, &h, &zero, &zero, &[0.05], &[1.0]);
        let mu = out.matching.mu[(0, 0)];
        assert!((mu - 0.025).abs() <= 1e-9, "mu = {mu}");
        assert_eq!(out.tau_alpha[(0, 0)], 0.0);
        assert!((out.tau_gamma[(0, 0)] - 39f64.ln()).abs() <= 1e-6);
        assert!(report.pass);
    }

    #[test]
    fn two_by_two_limit_satisfies_the_logit_matching_equations() {
        let (g, h) = unit_logit_pair(2, 2);
        let alpha = Matrix::new(2, 2, vec![0.3, -0.4, -0.2, 0.5]).unwrap();
        let gamma = Matrix::new(2, 2, vec![0.1, 0.2, -0.3, -0.1]).unwrap();
        let n = [1.0, 1.0];
        let m = [1.0, 1.0];
        let (trace, out, report) = solve_and_verify(&g, &h, &alpha, &gamma, &n, &m);
        assert!(report.pass, "{report:?}");
        assert!(trace_invariants(&trace).pass);
        // Closed-form fixed point: mu = min(mu_x0 e^alpha, mu_0y e^gamma).
        for x in 0..2 {
            for y in 0..2 {
                let want = (out.matching.mu_x0[x] * alpha[(x, y)].exp())
                    .min(out.matching.mu_0y[y] * gamma[(x, y)].exp());
                let got = out.matching.mu[(x, y)];
                assert!((got - want).abs() <= 1e-6, "route ({x},{y}): {got} vs {want}");
            }
        }

        // The Alkan-Gale variant lands on the same limit here.
        let ag = run_alkan_gale(&g, &h, &alpha, &gamma, None, &DaOptions::default()).unwrap();
        assert!(ag.converged);
        let ag_out = extract_equilibrium(&ag, &g, &h, &alpha, &gamma, &n, &m).unwrap();
        assert!(out.matching.mu.sup_diff(&ag_out.matching.mu) <= 1e-6);
        assert!(trace_invariants(&ag).pass);
    }

    #[test]
    fn quadratic_disposal_side_verifies() {
        let g = LogitWelfare::x_side(vec![1.0], 1).unwrap();
        let h = QuadraticWelfare::new(vec![1.0], Matrix::constant(1, 1, 1.0)).unwrap();
        let alpha = Matrix::zeros(1, 1);
        let gamma = Matrix::constant(1, 1, 0.8);
        let trace = run_da(&g, &h, &alpha, &gamma, &DaOptions::default()).unwrap();
        assert!(trace.converged);
        let out = extract_equilibrium(&trace, &g, &h, &alpha, &gamma, &[1.0], &[1.0]).unwrap();
        // x wants 1/2 and the quadratic side would take 0.8, so the cap
        // binds on the disposal side: tau_gamma = 0.8 - 0.5.
        assert!((out.matching.mu[(0, 0)] - 0.5).abs() <= 1e-9);
        assert_eq!(out.tau_alpha[(0, 0)], 0.0);
        assert!((out.tau_gamma[(0, 0)] - 0.3).abs() <= 1e-8);
        let report =
            verify_generalized_equilibrium(&out, &g, &h, &alpha, &gamma, 1e-6).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn iteration_cap_flags_the_trace_instead_of_erroring() {
        let (g, h) = unit_logit_pair(2, 2);
        let alpha = Matrix::new(2, 2, vec![0.3, -0.4, -0.2, 0.5]).unwrap();
        let gamma = Matrix::new(2, 2, vec![0.1, 0.2, -0.3, -0.1]).unwrap();
        let opts = DaOptions { max_iter: 2, ..DaOptions::default() };
        let trace = run_da(&g, &h, &alpha, &gamma, &opts).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.termination, Termination::IterationCap);
        assert_eq!(trace.iterations, 2);
        let err = extract_equilibrium(&trace, &g, &h, &alpha, &gamma, &[1.0; 2], &[1.0; 2]);
        assert!(matches!(err, Err(Error::State(_))));
    }

    #[test]
    fn verification_rejects_perturbed_outcomes() {
        let (g, h) = unit_logit_pair(1, 1);
        let zero = Matrix::zeros(1, 1);
        let (_, out, _) = solve_and_verify(&g, &h, &zero, &zero, &[1.0], &[1.0]);

        let mut bumped_u = out.clone();
        bumped_u.u[(0, 0)] += 0.1;
        let r = verify_generalized_equilibrium(&bumped_u, &g, &h, &zero, &zero, 1e-6).unwrap();
        assert!(!r.pass && r.fenchel_g > 1e-6, "{r:?}");

        let mut bumped_tau = out.clone();
        bumped_tau.tau_alpha[(0, 0)] = 0.1;
        bumped_tau.tau_gamma[(0, 0)] = 0.1;
        let r = verify_generalized_equilibrium(&bumped_tau, &g, &h, &zero, &zero, 1e-6).unwrap();
        assert!(!r.pass && (r.blocking - 0.1).abs() <= 1e-12, "{r:?}");
    }

    #[test]
    fn corrupted_trace_fails_the_invariants_with_a_witness() {
        let g = LogitWelfare::x_side(vec![1.0], 1).unwrap();
        let h = LogitWelfare::y_side(vec![0.05], 1).unwrap();
        let zero = Matrix::zeros(1, 1);
        let mut trace = run_da(&g, &h, &zero, &zero, &DaOptions::default()).unwrap();
        assert!(trace.iterations >= 2);
        trace.iterates.swap(0, 1);
        let report = trace_invariants(&trace);
        assert!(!report.pass);
        assert_eq!(report.witness, Some(1));
    }

    #[test]
    fn lying_multipliers_trip_the_integrity_check() {
        struct Liar(LogitWelfare);
        impl Welfare for Liar {
            fn shape(&self) -> (usize, usize) {
                self.0.shape()
            }
            fn value(&self, u: &Matrix) -> Result<f64> {
                self.0.value(u)
            }
            fn conjugate(&self, mu: &Matrix) -> Result<f64> {
                self.0.conjugate(mu)
            }
            fn demand_cap(&self) -> Matrix {
                self.0.demand_cap()
            }
            fn constrained_demand(
                &self,
                alpha: &Matrix,
                hi: &Matrix,
                lo: &Matrix,
            ) -> Result<Matrix> {
                self.0.constrained_demand(alpha, hi, lo)
            }
            fn multipliers(&self, alpha: &Matrix, _hi: &Matrix) -> Result<Matrix> {
                Ok(Matrix::constant(alpha.rows(), alpha.cols(), 5.0))
            }
        }
        let g = LogitWelfare::x_side(vec![1.0], 1).unwrap();
        let h = Liar(LogitWelfare::y_side(vec![1.0], 1).unwrap());
        let zero = Matrix::zeros(1, 1);
        let err = run_da(&g, &h, &zero, &zero, &DaOptions::default());
        assert!(matches!(err, Err(Error::Integrity(_))), "{err:?}");
    }

    #[test]
    fn options_are_validated() {
        let (g, h) = unit_logit_pair(1, 1);
        let zero = Matrix::zeros(1, 1);
        let opts = DaOptions { tol_stop: 0.0, ..DaOptions::default() };
        assert!(run_da(&g, &h, &zero, &zero, &opts).is_err());
        let opts = DaOptions { max_iter: 0, ..DaOptions::default() };
        assert!(run_da(&g, &h, &zero, &zero, &opts).is_err());
    }

    #[test]
    fn trace_export_is_deterministic_jsonl() {
        let g = LogitWelfare::x_side(vec![1.0], 1).unwrap();
        let h = LogitWelfare::y_side(vec![0.05], 1).unwrap();
        let zero = Matrix::zeros(1, 1);
        let mut first = Vec::new();
        let mut second = Vec::new();
        for buf in [&mut first, &mut second] {
            let trace = run_da(&g, &h, &zero, &zero, &DaOptions::default()).unwrap();
            write_trace_jsonl(&trace, buf).unwrap();
        }
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("\"options\""));
        assert!(lines[0].contains("\"converged\":true"));
        assert_eq!(lines.len() as usize, 1 + 2);
        for line in &lines[1..] {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("mu_a").is_some() && v.get("residual").is_some());
        }
    }
}
