//! Finite point sets and the exchange-order checks on them.
//!
//! A [`PointSet`] is a finite list of distinct points in `R^d`. The checks
//! discretize the exchange quantifiers on a lattice of multiples of a
//! caller-chosen `step`; membership is tested with an absolute tolerance.
//! Violations are reported as distances, the sup-norm gap between the best
//! exchange candidate and the set, so `0` means an exact witness exists.

use serde::{Deserialize, Serialize};

use crate::orders::{CheckOptions, OrderReport};
use crate::scan::{scan, split_radix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointSetDe {
    points: Vec<Vec<f64>>,
}

impl<'de> Deserialize<'de> for PointSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PointSetDe::deserialize(d)?;
        PointSet::new(raw.points).map_err(serde::de::Error::custom)
    }
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        for p in &points {
            if p.len() != dim {
                return Err(Error::Shape("points of mixed dimension".into()));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("point with non-finite coordinate".into()));
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(Error::Domain(format!("duplicate point at {i} and {j}")));
                }
            }
        }
        Ok(Self { points })
    }

    /// All integer points of the box `[lo, hi]` scaled by `step`.
    pub fn box_lattice(lo: &[f64], hi: &[f64], step: f64) -> Result<Self> {
        assert_eq!(lo.len(), hi.len());
        let d = lo.len();
        let counts: Vec<usize> =
            (0..d).map(|c| ((hi[c] - lo[c]) / step + 1e-9).floor() as usize + 1).collect();
        let total: usize = counts.iter().product();
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rest = flat;
            let mut p = vec![0.0; d];
            for c in (0..d).rev() {
                p[c] = lo[c] + step * (rest % counts[c]) as f64;
                rest /= counts[c];
            }
            points.push(p);
        }
        Self::new(points)
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Sup-norm distance from `p` to the nearest member; `+inf` when empty.
    pub fn sup_dist(&self, p: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|q| {
                q.iter().zip(p).fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()))
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.sup_dist(p) <= tol
    }
}

/// Largest inner product with `direction` over the set.
pub fn support_function(x: &PointSet, direction: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Domain("support function of an empty set".into()));
    }
    if direction.len() != x.dim() {
        return Err(Error::Shape("direction dimension mismatch".into()));
    }
    Ok(x.points()
        .iter()
        .map(|p| p.iter().zip(direction).map(|(&a, &b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max))
}

fn lattice_count(bound: f64, step: f64) -> u64 {
    debug_assert!(bound >= 0.0);
    (bound / step + 1e-9).floor() as u64 + 1
}

/// Exchange order between two point sets: for all `x` in `X`, `y` in `Y`
/// and every lattice `delta1` in `[0, (x-y)^+]` there must be a lattice
/// `delta2` in `[0, (x-y)^-]` with `x - delta1 + delta2` back in `X` and
/// `y + delta1 - delta2` back in `Y`.
pub fn check_q_order_sets(
    x: &PointSet,
    y: &PointSet,
    step: f64,
    opts: &CheckOptions,
) -> Result<OrderReport> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain("exchange order needs nonempty sets".into()));
    }
    if x.dim() != y.dim() {
        return Err(Error::Shape("point sets of different dimension".into()));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain("delta lattice step must be positive".into()));
    }
    let d = x.dim();

    // Combination space: (i, j, delta1 digits), sized per pair.
    let pairs = x.len() as u64 * y.len() as u64;
    let mut prefix: Vec<u128> = Vec::with_capacity(pairs as usize + 1);
    prefix.push(0);
    for xi in x.points() {
        for yj in y.points() {
            let count: u128 = (0..d)
                .map(|c| lattice_count((xi[c] - yj[c]).max(0.0), step) as u128)
                .product();
            prefix.push(prefix.last().unwrap() + count);
        }
    }
    let total = *prefix.last().unwrap();

    let decode = |idx: u128| -> (usize, usize, Vec<f64>) {
        let pair = prefix.partition_point(|&p| p <= idx) - 1;
        let mut rest = idx - prefix[pair];
        let (i, j) = (pair / y.len(), pair % y.len());
        let (xi, yj) = (&x.points()[i], &y.points()[j]);
        let mut delta1 = vec![0.0; d];
        for c in (0..d).rev() {
            let radix = lattice_count((xi[c] - yj[c]).max(0.0), step);
            let (digit, r) = split_radix(rest, radix);
            delta1[c] = digit as f64 * step;
            rest = r;
        }
        (i, j, delta1)
    };

    // Violation: best achievable membership distance over the delta2 lattice.
    let eval = |idx: u128| -> f64 {
        let (i, j, delta1) = decode(idx);
        let xi = &x.points()[i];
        let yj = &y.points()[j];
        let counts: Vec<u64> =
            (0..d).map(|c| lattice_count((yj[c] - xi[c]).max(0.0), step)).collect();
        let inner: u128 = counts.iter().map(|&c| c as u128).product();
        let mut best = f64::INFINITY;
        let mut xt = vec![0.0; d];
        let mut yt = vec![0.0; d];
        for k in 0..inner {
            let mut rest = k;
            for c in (0..d).rev() {
                let (digit, r) = split_radix(rest, counts[c]);
                let d2 = digit as f64 * step;
                xt[c] = xi[c] - delta1[c] + d2;
                yt[c] = yj[c] + delta1[c] - d2;
                rest = r;
            }
            let dist = x.sup_dist(&xt).max(y.sup_dist(&yt));
            best = best.min(dist);
            if best == 0.0 {
                break;
            }
        }
        best
    };

    let out = scan(total, opts.membership_tol, &opts.scan, eval);
    let witness = out.first_fail_idx.map(|idx| {
        let (i, j, delta1) = decode(idx);
        serde_json::json!({
            "x": x.points()[i],
            "y": y.points()[j],
            "delta1": delta1,
        })
    });
    Ok(OrderReport::from_scan(out, opts.membership_tol, opts.scan.seed, witness))
}

/// A set is a matron when it is in exchange order with itself.
pub fn check_matron(x: &PointSet, step: f64, opts: &CheckOptions) -> Result<OrderReport> {
    check_q_order_sets(x, x, step, opts)
}

/// M-natural exchange: for `x`, `y` in the set and `i` with `x_i > y_i`,
/// one lattice step along `e_i - e_j` (with `j` in the negative support, or
/// `j = 0` meaning no compensation) keeps both ends in the set. Single
/// steps compose, so this is the form whose passes are closed under the
/// matron exchange; accepting longer steps would pass sets like `{0, 1}`
/// on a `0.5` lattice that the exchange order rejects.
pub fn check_m_natural(x: &PointSet, step: f64, opts: &CheckOptions) -> Result<OrderReport> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain("alpha lattice step must be positive".into()));
    }
    let d = x.dim();
    let total = (x.len() as u128) * (x.len() as u128) * (d as u128);
    let decode = |idx: u128| -> (usize, usize, usize) {
        let (i, rest) = split_radix(idx, x.len() as u64);
        let (j, rest) = split_radix(rest, x.len() as u64);
        (i as usize, j as usize, rest as usize)
    };

    let eval = |idx: u128| -> f64 {
        let (xi_idx, yj_idx, coord) = decode(idx);
        let xi = &x.points()[xi_idx];
        let yj = &x.points()[yj_idx];
        if xi[coord] - yj[coord] <= 0.0 {
            return 0.0; // coordinate not in the positive support
        }
        let neg_support: Vec<Option<usize>> = std::iter::once(None)
            .chain((0..d).filter(|&c| xi[c] - yj[c] < 0.0).map(Some))
            .collect();
        let mut best = f64::INFINITY;
        let mut xt = vec![0.0; d];
        let mut yt = vec![0.0; d];
        for &j in &neg_support {
            xt.copy_from_slice(xi);
            yt.copy_from_slice(yj);
            xt[coord] -= step;
            yt[coord] += step;
            if let Some(j) = j {
                xt[j] += step;
                yt[j] -= step;
            }
            let dist = x.sup_dist(&xt).max(x.sup_dist(&yt));
            best = best.min(dist);
            if best == 0.0 {
                return 0.0;
            }
        }
        best
    };

    let out = scan(total, opts.membership_tol, &opts.scan, eval);
    let witness = out.first_fail_idx.map(|idx| {
        let (i, j, coord) = decode(idx);
        serde_json::json!({
            "x": x.points()[i],
            "y": x.points()[j],
            "coordinate": coord,
        })
    });
    Ok(OrderReport::from_scan(out, opts.membership_tol, opts.scan.seed, witness))
}
