//! `matron-match`: solve aggregate matching instances, verify stored
//! results, run declarative order checks, and compute discrete Legendre
//! transforms.
//!
//! Exit codes: `0` success (solve: converged and verified; verify and
//! check-order: pass), `1` a well-formed run that fails its check, `2`
//! unreadable input or schema violation, `3` solver iteration cap reached
//! (a partial result is still written).

mod formats;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use matron::conjugate::legendre_transform;
use matron::da::{
    extract_equilibrium, run_da, verify_generalized_equilibrium, write_trace_jsonl, DaTrace,
    UpdateRule, INTEGRITY_TOL,
};
use matron::grid::{linspace, GridFunction};

use formats::{InstanceFile, OrderSpec, ResultFile, Side};

#[derive(Parser)]
#[command(name = "matron-match", version, about = "Aggregate matching and convex-order toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Subtractive,
    AlkanGale,
}

impl From<RuleArg> for UpdateRule {
    fn from(rule: RuleArg) -> Self {
        match rule {
            RuleArg::Subtractive => UpdateRule::Subtractive,
            RuleArg::AlkanGale => UpdateRule::AlkanGale,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve an instance and write the equilibrium result file.
    Solve {
        /// Instance JSON path.
        instance: PathBuf,
        /// Result file path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Iterate trace path (JSON lines).
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Stop tolerance override.
        #[arg(long)]
        tol: Option<f64>,
        /// Iteration cap override.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Update rule override.
        #[arg(long, value_enum)]
        update_rule: Option<RuleArg>,
    },
    /// Re-verify a stored result against its instance.
    Verify {
        /// Instance JSON path.
        instance: PathBuf,
        /// Result JSON path.
        result: PathBuf,
        /// Verification tolerance.
        #[arg(long, default_value_t = INTEGRITY_TOL)]
        tol: f64,
    },
    /// Run the order check described by a declarative spec file.
    CheckOrder {
        /// Check spec JSON path.
        spec: PathBuf,
    },
    /// Legendre transform of a grid function file.
    Conjugate {
        /// Grid function JSON path.
        grid: PathBuf,
        /// Dual axes, one `lo:hi:count` triple per coordinate, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        dual_axes: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.cmd {
        Cmd::Solve { instance, out, trace_out, tol, max_iter, update_rule } => {
            cmd_solve(&instance, out.as_deref(), trace_out.as_deref(), tol, max_iter, update_rule)
        }
        Cmd::Verify { instance, result, tol } => cmd_verify(&instance, &result, tol),
        Cmd::CheckOrder { spec } => cmd_check_order(&spec),
        Cmd::Conjugate { grid, dual_axes, out } => {
            cmd_conjugate(&grid, &dual_axes, out.as_deref())
        }
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

/// Serialize with a trailing newline; identical values give identical bytes.
fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_solve(
    instance: &Path,
    out: Option<&Path>,
    trace_out: Option<&Path>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    update_rule: Option<RuleArg>,
) -> anyhow::Result<u8> {
    let file: InstanceFile = read_json(instance, "instance")?;
    file.validate()?;
    let mut opts = file.options.clone();
    if let Some(t) = tol {
        opts.tol_stop = t;
    }
    if let Some(k) = max_iter {
        opts.max_iter = k;
    }
    if let Some(rule) = update_rule {
        opts.update_rule = rule.into();
    }
    opts.validate()?;

    let g = file.welfare_g.build(Side::Proposing, &file.n, &file.m)?;
    let h = file.welfare_h.build(Side::Disposing, &file.n, &file.m)?;
    let trace = run_da(g.as_ref(), h.as_ref(), &file.alpha, &file.gamma, &opts)?;
    if let Some(path) = trace_out {
        let mut buf = Vec::new();
        write_trace_jsonl(&trace, &mut buf)?;
        fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }

    if !trace.converged {
        emit(&partial_result(&trace, &file, opts.seed), out)?;
        let residual = trace.iterates.last().map_or(f64::INFINITY, |it| it.residual);
        eprintln!(
            "no convergence within {} iterations (stop residual {residual:.3e})",
            trace.iterations
        );
        return Ok(3);
    }

    let outcome = extract_equilibrium(
        &trace,
        g.as_ref(),
        h.as_ref(),
        &file.alpha,
        &file.gamma,
        &file.n,
        &file.m,
    )?;
    let report = verify_generalized_equilibrium(
        &outcome,
        g.as_ref(),
        h.as_ref(),
        &file.alpha,
        &file.gamma,
        INTEGRITY_TOL,
    )?;
    emit(&ResultFile::from_outcome(&outcome, opts.seed), out)?;
    if !report.pass {
        eprintln!("converged but failed verification: {}", serde_json::to_string(&report)?);
        return Ok(1);
    }
    Ok(0)
}

/// Result file for a run that hit the iteration cap: the last tentative
/// matching with raw marginal slacks, which may be negative.
fn partial_result(trace: &DaTrace, file: &InstanceFile, seed: u64) -> ResultFile {
    let last = trace.iterates.last().expect("capped runs record their iterates");
    let mu = last.mu_t.clone();
    let mu_x0: Vec<f64> = (0..mu.rows()).map(|i| file.n[i] - mu.row_sum(i)).collect();
    let mu_0y: Vec<f64> = (0..mu.cols()).map(|j| file.m[j] - mu.col_sum(j)).collect();
    ResultFile {
        tool: "matron-match".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        mu,
        mu_x0,
        mu_0y,
        u: file.alpha.sub(&last.tau_p),
        v: file.gamma.sub(&last.tau_t),
        tau_alpha: last.tau_p.clone(),
        tau_gamma: last.tau_t.clone(),
        residuals: [("stop".to_string(), last.residual)].into(),
        iterations: trace.iterations,
        converged: false,
    }
}

fn cmd_verify(instance: &Path, result: &Path, tol: f64) -> anyhow::Result<u8> {
    let file: InstanceFile = read_json(instance, "instance")?;
    file.validate()?;
    let stored: ResultFile = read_json(result, "result")?;
    let (x, y) = file.shape();
    if stored.mu.shape() != (x, y) {
        anyhow::bail!("result mu is {:?}, instance is {x}x{y}", stored.mu.shape());
    }
    let outcome = stored.to_outcome()?;
    let g = file.welfare_g.build(Side::Proposing, &file.n, &file.m)?;
    let h = file.welfare_h.build(Side::Disposing, &file.n, &file.m)?;
    let report = verify_generalized_equilibrium(
        &outcome,
        g.as_ref(),
        h.as_ref(),
        &file.alpha,
        &file.gamma,
        tol,
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_check_order(spec: &Path) -> anyhow::Result<u8> {
    let spec: OrderSpec = read_json(spec, "check spec")?;
    let (pass, report, witness) = spec.run()?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if pass {
        Ok(0)
    } else {
        if let Some(w) = witness {
            eprintln!("witness: {w}");
        }
        Ok(1)
    }
}

fn cmd_conjugate(grid: &Path, dual_axes: &str, out: Option<&Path>) -> anyhow::Result<u8> {
    let f: GridFunction = read_json(grid, "grid function")?;
    let axes = parse_dual_axes(dual_axes)?;
    if axes.len() != f.dim() {
        anyhow::bail!("{} dual axes for a {}-dimensional function", axes.len(), f.dim());
    }
    let conj = legendre_transform(&f, axes)?;
    emit(&conj, out)?;
    Ok(0)
}

/// `lo:hi:count` triples, comma separated, one per coordinate.
fn parse_dual_axes(text: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    text.split(',')
        .map(|triple| {
            let parts: Vec<&str> = triple.split(':').collect();
            let [lo, hi, count] = parts.as_slice() else {
                anyhow::bail!("expected lo:hi:count, got {triple:?}");
            };
            let lo: f64 = lo.trim().parse().context("axis lower bound")?;
            let hi: f64 = hi.trim().parse().context("axis upper bound")?;
            let count: usize = count.trim().parse().context("axis point count")?;
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() || count == 0 {
                anyhow::bail!("axis {triple:?} must satisfy lo <= hi with count >= 1");
            }
            Ok(linspace(lo, hi, count))
        })
        .collect()
}
