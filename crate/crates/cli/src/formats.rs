//! On-disk JSON formats: instance files, result files, and declarative
//! order-check specifications. Matrices use the explicit `{rows, cols,
//! data}` row-major encoding throughout, with infinities spelled `"inf"`
//! and `"-inf"`.

use std::collections::BTreeMap;

use anyhow::{bail, Context};
use matron::da::DaOptions;
use matron::grid::GridFunction;
use matron::matrix::Matrix;
use matron::model::EquilibriumOutcome;
use matron::model::Matching;
use matron::orders::{CheckOptions, SetFunctionPair};
use matron::scan::ScanParams;
use matron::sets::PointSet;
use matron::welfare::{grid_welfare_from_conjugate, LogitWelfare, QuadraticWelfare, Welfare};
use serde::{Deserialize, Serialize};

/// A market: type labels, masses, pairwise utilities, and the welfare
/// function of each side. Omitted welfare blocks default to logit; omitted
/// options default to the solver defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub types_x: Vec<String>,
    pub types_y: Vec<String>,
    pub n: Vec<f64>,
    pub m: Vec<f64>,
    pub alpha: Matrix,
    pub gamma: Matrix,
    #[serde(default)]
    pub welfare_g: WelfareSpec,
    #[serde(default)]
    pub welfare_h: WelfareSpec,
    #[serde(default)]
    pub options: DaOptions,
}

impl InstanceFile {
    pub fn validate(&self) -> anyhow::Result<()> {
        let (x, y) = (self.types_x.len(), self.types_y.len());
        if self.n.len() != x || self.m.len() != y {
            bail!("mass vectors must match the type lists ({x} x types, {y} y types)");
        }
        if self.alpha.shape() != (x, y) || self.gamma.shape() != (x, y) {
            bail!(
                "alpha and gamma must be {x}x{y}, got {:?} and {:?}",
                self.alpha.shape(),
                self.gamma.shape()
            );
        }
        if self.n.iter().chain(&self.m).any(|&v| !v.is_finite() || v < 0.0) {
            bail!("masses must be finite and nonnegative");
        }
        if !self.alpha.all_finite() || !self.gamma.all_finite() {
            bail!("alpha and gamma must be finite");
        }
        self.options.validate().context("options")?;
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.types_x.len(), self.types_y.len())
    }
}

/// Which side of the market a welfare block is instantiated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Proposing,
    Disposing,
}

/// Welfare function description. `quadratic` takes the coefficient matrix
/// over pair indices in row-major order (a nested `k x k` array for `k`
/// pairs); its cap defaults to the owning side's type mass on every route.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WelfareSpec {
    #[default]
    Logit,
    Quadratic {
        a: Vec<Vec<f64>>,
        #[serde(default)]
        cap: Option<Matrix>,
    },
    Grid {
        conjugate: GridFunction,
        cap: Matrix,
    },
}

impl WelfareSpec {
    pub fn build(
        &self,
        side: Side,
        n: &[f64],
        m: &[f64],
    ) -> anyhow::Result<Box<dyn Welfare>> {
        let (rows, cols) = (n.len(), m.len());
        let welfare: Box<dyn Welfare> = match self {
            WelfareSpec::Logit => match side {
                Side::Proposing => Box::new(LogitWelfare::x_side(n.to_vec(), cols)?),
                Side::Disposing => Box::new(LogitWelfare::y_side(m.to_vec(), rows)?),
            },
            WelfareSpec::Quadratic { a, cap } => {
                let k = rows * cols;
                if a.len() != k || a.iter().any(|row| row.len() != k) {
                    bail!("quadratic coefficient matrix must be {k}x{k} for {k} pairs");
                }
                let flat: Vec<f64> = a.iter().flatten().copied().collect();
                let cap = match cap {
                    Some(c) => c.clone(),
                    None => Matrix::from_fn(rows, cols, |i, j| match side {
                        Side::Proposing => n[i],
                        Side::Disposing => m[j],
                    }),
                };
                Box::new(QuadraticWelfare::new(flat, cap)?)
            }
            WelfareSpec::Grid { conjugate, cap } => {
                Box::new(grid_welfare_from_conjugate(conjugate.clone(), cap.clone())?)
            }
        };
        if welfare.shape() != (rows, cols) {
            bail!("welfare block is shaped {:?}, market is {rows}x{cols}", welfare.shape());
        }
        Ok(welfare)
    }
}

/// Solved outcome plus the provenance needed to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub mu: Matrix,
    pub mu_x0: Vec<f64>,
    pub mu_0y: Vec<f64>,
    #[serde(rename = "U")]
    pub u: Matrix,
    #[serde(rename = "V")]
    pub v: Matrix,
    pub tau_alpha: Matrix,
    pub tau_gamma: Matrix,
    pub residuals: BTreeMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ResultFile {
    pub fn from_outcome(outcome: &EquilibriumOutcome, seed: u64) -> Self {
        ResultFile {
            tool: "matron-match".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            mu: outcome.matching.mu.clone(),
            mu_x0: outcome.matching.mu_x0.clone(),
            mu_0y: outcome.matching.mu_0y.clone(),
            u: outcome.u.clone(),
            v: outcome.v.clone(),
            tau_alpha: outcome.tau_alpha.clone(),
            tau_gamma: outcome.tau_gamma.clone(),
            residuals: outcome.residuals.clone(),
            iterations: outcome.iterations,
            converged: outcome.converged,
        }
    }

    pub fn to_outcome(&self) -> anyhow::Result<EquilibriumOutcome> {
        let matching =
            Matching::new(self.mu.clone(), self.mu_x0.clone(), self.mu_0y.clone())
                .context("result matching")?;
        Ok(EquilibriumOutcome {
            matching,
            u: self.u.clone(),
            v: self.v.clone(),
            tau_alpha: self.tau_alpha.clone(),
            tau_gamma: self.tau_gamma.clone(),
            residuals: self.residuals.clone(),
            iterations: self.iterations,
            converged: self.converged,
        })
    }
}

/// Scan knobs shared by every order-check specification.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOptionsSpec {
    pub tol: Option<f64>,
    pub membership_tol: Option<f64>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl CheckOptionsSpec {
    pub fn to_options(&self) -> CheckOptions {
        let defaults = CheckOptions::default();
        let scan_defaults = ScanParams::default();
        CheckOptions {
            tol: self.tol.unwrap_or(defaults.tol),
            membership_tol: self.membership_tol.unwrap_or(defaults.membership_tol),
            scan: ScanParams {
                budget: self.budget.unwrap_or(scan_defaults.budget),
                seed: self.seed.unwrap_or(scan_defaults.seed),
                threads: thread_cap(self.threads.unwrap_or(scan_defaults.threads)),
            },
        }
    }
}

/// Apply the `MATRON_MATCH_THREADS` cap to a requested thread count
/// (`0` means the machine's available parallelism).
pub fn thread_cap(requested: usize) -> usize {
    match std::env::var("MATRON_MATCH_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
    {
        Some(cap) if requested == 0 => cap,
        Some(cap) => requested.min(cap),
        None => requested,
    }
}

/// A declarative order check: which check, its inputs, and scan options.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum OrderSpec {
    Submodular {
        f: GridFunction,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    QOrderFunctions {
        f: GridFunction,
        g: GridFunction,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    POrder {
        f: GridFunction,
        g: GridFunction,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    EpsDQOrder {
        f: GridFunction,
        g: GridFunction,
        eps: f64,
        #[serde(default)]
        d_set: Vec<usize>,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    EpsDPOrder {
        f: GridFunction,
        g: GridFunction,
        eps: f64,
        #[serde(default)]
        d_set: Vec<usize>,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    Duality {
        f: GridFunction,
        g: GridFunction,
        eps: f64,
        #[serde(default)]
        d_set: Vec<usize>,
        dual_axes: Vec<Vec<f64>>,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    Matron {
        points: Vec<Vec<f64>>,
        step: f64,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    MNatural {
        points: Vec<Vec<f64>>,
        step: f64,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    QOrderSets {
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        step: f64,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
    Paramodular {
        ground: usize,
        g: Vec<f64>,
        h: Vec<f64>,
        #[serde(default)]
        options: CheckOptionsSpec,
    },
}

impl OrderSpec {
    /// Run the named check. Returns pass/fail, the serialized report, and
    /// the witness when one was found.
    pub fn run(&self) -> anyhow::Result<(bool, serde_json::Value, Option<serde_json::Value>)> {
        use matron::orders as ord;
        use matron::sets;
        let report = |r: ord::OrderReport| -> anyhow::Result<_> {
            let witness = r.witness.clone();
            Ok((r.pass, serde_json::to_value(&r)?, witness))
        };
        match self {
            OrderSpec::Submodular { f, options } => {
                report(ord::check_submodular(f, &options.to_options())?)
            }
            OrderSpec::QOrderFunctions { f, g, options } => {
                report(ord::check_q_order_functions(f, g, &options.to_options())?)
            }
            OrderSpec::POrder { f, g, options } => {
                report(ord::check_p_order(f, g, &options.to_options())?)
            }
            OrderSpec::EpsDQOrder { f, g, eps, d_set, options } => {
                report(ord::check_eps_d_q_order(f, g, *eps, d_set, &options.to_options())?)
            }
            OrderSpec::EpsDPOrder { f, g, eps, d_set, options } => {
                report(ord::check_eps_d_p_order(f, g, *eps, d_set, &options.to_options())?)
            }
            OrderSpec::Duality { f, g, eps, d_set, dual_axes, options } => {
                let r = ord::duality_check(
                    f,
                    g,
                    *eps,
                    d_set,
                    dual_axes.clone(),
                    &options.to_options(),
                )?;
                let witness =
                    r.q.witness.clone().or_else(|| r.p.witness.clone());
                Ok((r.pass, serde_json::to_value(&r)?, witness))
            }
            OrderSpec::Matron { points, step, options } => {
                let set = PointSet::new(points.clone())?;
                report(sets::check_matron(&set, *step, &options.to_options())?)
            }
            OrderSpec::MNatural { points, step, options } => {
                let set = PointSet::new(points.clone())?;
                report(sets::check_m_natural(&set, *step, &options.to_options())?)
            }
            OrderSpec::QOrderSets { x, y, step, options } => {
                let xs = PointSet::new(x.clone())?;
                let ys = PointSet::new(y.clone())?;
                report(sets::check_q_order_sets(&xs, &ys, *step, &options.to_options())?)
            }
            OrderSpec::Paramodular { ground, g, h, options } => {
                let pair = SetFunctionPair::new(*ground, g.clone(), h.clone())?;
                report(ord::check_paramodular(&pair, &options.to_options())?)
            }
        }
    }
}
