//! Discrete Legendre transforms and subdifferentials.
//!
//! The conjugate is computed literally: at each dual node `p` it is the max
//! of `p.s - f(s)` over the primal grid's effective domain. That is exact
//! for the grid-restricted function; [`Conjugate::error_bound`] estimates
//! how far it can sit below the conjugate of the underlying continuous
//! function, and [`Conjugate::boundary_saturated`] warns when the max is
//! pinned to the primal boundary, the sign that the dual axes reach beyond
//! the slopes the grid can certify.

use crate::grid::GridFunction;
use crate::orders::serialize_bools;
use crate::{Error, Result};
use serde::Serialize;

/// Evaluation budget for one transform (dual nodes times domain nodes).
const MAX_EVALS: u128 = 50_000_000;

/// Relative tolerance for tie-breaking among argmax candidates.
const TIE_REL_TOL: f64 = 1e-12;

/// Result of [`legendre_transform`].
#[derive(Debug, Clone, Serialize)]
pub struct Conjugate {
    pub grid: GridFunction,
    /// Bound on the sampling gap below the continuous conjugate, from the
    /// primal mesh widths, the dual axis ranges, and the observed slopes.
    pub error_bound: f64,
    /// Per primal axis: some dual node attains its max only on that axis's
    /// boundary, so the conjugate is truncated there.
    #[serde(serialize_with = "serialize_bools")]
    pub boundary_saturated: Vec<bool>,
}

/// `f*(p) = max over domain nodes s of p.s - f(s)` at each dual node.
pub fn legendre_transform(f: &GridFunction, dual_axes: Vec<Vec<f64>>) -> Result<Conjugate> {
    let d = f.dim();
    if dual_axes.len() != d {
        return Err(Error::Shape(format!(
            "{} dual axes for a {d}-dimensional function",
            dual_axes.len()
        )));
    }
    let dom = f.finite_nodes();
    if dom.is_empty() {
        return Err(Error::Domain("conjugate of an empty effective domain".into()));
    }
    let dual_total: u128 = dual_axes.iter().map(|a| a.len() as u128).product();
    if dual_total * dom.len() as u128 > MAX_EVALS {
        return Err(Error::Size("conjugate evaluation budget exceeded; coarsen a grid".into()));
    }

    // Flattened domain coordinates, d per node, plus boundary flags.
    let lens = f.lens();
    let mut coords: Vec<f64> = Vec::with_capacity(dom.len() * d);
    let mut on_boundary: Vec<bool> = Vec::with_capacity(dom.len() * d);
    let mut multi = vec![0usize; d];
    for &flat in &dom {
        f.multi_index(flat, &mut multi);
        for c in 0..d {
            coords.push(f.axes()[c][multi[c]]);
            on_boundary.push(multi[c] == 0 || multi[c] + 1 == lens[c]);
        }
    }
    let fvals: Vec<f64> = dom.iter().map(|&flat| f.value(flat)).collect();

    let dual_lens: Vec<usize> = dual_axes.iter().map(Vec::len).collect();
    let mut values = Vec::with_capacity(dual_total as usize);
    let mut saturated = vec![false; d];
    let mut p = vec![0.0; d];
    let mut dual_multi = vec![0usize; d];
    for flat in 0..dual_total as usize {
        let mut rest = flat;
        for c in (0..d).rev() {
            dual_multi[c] = rest % dual_lens[c];
            rest /= dual_lens[c];
        }
        for c in 0..d {
            p[c] = dual_axes[c][dual_multi[c]];
        }

        let mut best = f64::NEG_INFINITY;
        for (k, &fv) in fvals.iter().enumerate() {
            let dot: f64 = (0..d).map(|c| p[c] * coords[k * d + c]).sum();
            best = best.max(dot - fv);
        }
        values.push(best);

        // Tie pass: an axis saturates when no near-maximizer is interior.
        let tie = TIE_REL_TOL * best.abs().max(1.0);
        let mut interior_seen = vec![false; d];
        for (k, &fv) in fvals.iter().enumerate() {
            let dot: f64 = (0..d).map(|c| p[c] * coords[k * d + c]).sum();
            if dot - fv >= best - tie {
                for c in 0..d {
                    interior_seen[c] |= !on_boundary[k * d + c];
                }
            }
        }
        for c in 0..d {
            saturated[c] |= !interior_seen[c];
        }
    }

    let mut error_bound = 0.0;
    for c in 0..d {
        let h = f.axes()[c].windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        let p_max = dual_axes[c].iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let slope = f.slope_range(c).map_or(0.0, |(lo, hi)| lo.abs().max(hi.abs()));
        error_bound += h * (p_max + slope) / 2.0;
    }

    let grid = GridFunction::new(dual_axes, values)?;
    Ok(Conjugate { grid, error_bound, boundary_saturated: saturated })
}

/// All dual nodes `p` with `f*(p) + f(s) - p.s` within `tol` of zero, the
/// Fenchel-equality characterization of the subdifferential at `s`.
pub fn subdifferential(
    f: &GridFunction,
    dual_axes: Vec<Vec<f64>>,
    s: &[f64],
    tol: f64,
) -> Result<crate::sets::PointSet> {
    let flat = f.locate(s, 1e-9)?;
    let fs = f.value(flat);
    if !fs.is_finite() {
        return Err(Error::Domain("subdifferential at a point outside the domain".into()));
    }
    let conj = legendre_transform(f, dual_axes)?;
    let mut points = Vec::new();
    for k in 0..conj.grid.num_nodes() {
        let p = conj.grid.node_point(k);
        let dot: f64 = p.iter().zip(s).map(|(&a, &b)| a * b).sum();
        if (conj.grid.value(k) + fs - dot).abs() <= tol {
            points.push(p);
        }
    }
    crate::sets::PointSet::new(points)
}
