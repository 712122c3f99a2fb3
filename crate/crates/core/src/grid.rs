//! Functions sampled on rectangular grids.
//!
//! A [`GridFunction`] stores per-axis sample coordinates (strictly
//! increasing) and a dense row-major table of values in `R ∪ {+inf}`, where
//! `+inf` marks points outside the effective domain. Off-grid points are
//! treated as `+inf` by every check; evaluation is exact at the sampled
//! nodes, and nothing is ever interpolated.
//!
//! JSON form: `{"axes": [[..], ..], "values": [..]}`, values row-major with
//! `"inf"` markers for infinite entries.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::matrix::{deserialize_ext_vec, serialize_ext_slice};
use crate::{Error, Result};

/// Relative tolerance for recognizing a uniformly spaced axis.
const UNIFORM_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
    strides: Vec<usize>,
}

/// Evenly spaced coordinates, inclusive of both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1, "linspace needs at least one point");
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
}

fn compute_strides(lens: &[usize]) -> Result<(Vec<usize>, usize)> {
    let mut total: usize = 1;
    for &l in lens {
        total = total
            .checked_mul(l)
            .ok_or_else(|| Error::Size("grid node count overflows usize".into()))?;
    }
    let mut strides = vec![1usize; lens.len()];
    for c in (0..lens.len().saturating_sub(1)).rev() {
        strides[c] = strides[c + 1] * lens[c + 1];
    }
    Ok((strides, total))
}

impl GridFunction {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Domain("grid needs at least one axis".into()));
        }
        for (c, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(Error::Domain(format!("axis {c} needs at least 2 samples")));
            }
            if axis.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("axis {c} has a non-finite coordinate")));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain(format!("axis {c} is not strictly increasing")));
            }
        }
        let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
        let (strides, total) = compute_strides(&lens)?;
        if values.len() != total {
            return Err(Error::Shape(format!(
                "value table length {} does not match grid size {}",
                values.len(),
                total
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::Domain("grid values must lie in R or +inf".into()));
        }
        if values.iter().all(|v| !v.is_finite()) {
            return Err(Error::Domain("grid values are all +inf".into()));
        }
        Ok(Self { axes, values, strides })
    }

    /// Sample `f` at every node of the given axes.
    pub fn sample(axes: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
        let (_, total) = compute_strides(&lens)?;
        let d = axes.len();
        let mut idx = vec![0usize; d];
        let mut point = vec![0.0; d];
        let mut values = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rest = flat;
            for c in (0..d).rev() {
                idx[c] = rest % lens[c];
                rest /= lens[c];
            }
            for c in 0..d {
                point[c] = axes[c][idx[c]];
            }
            values.push(f(&point));
        }
        Self::new(axes, values)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn lens(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    #[inline]
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        multi.iter().zip(&self.strides).map(|(&i, &s)| i * s).sum()
    }

    pub fn multi_index(&self, flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.dim());
        let mut rest = flat;
        for c in (0..self.dim()).rev() {
            let len = self.axes[c].len();
            out[c] = rest % len;
            rest /= len;
        }
    }

    pub fn point_of(&self, multi: &[usize], out: &mut [f64]) {
        for c in 0..self.dim() {
            out[c] = self.axes[c][multi[c]];
        }
    }

    pub fn node_point(&self, flat: usize) -> Vec<f64> {
        let mut multi = vec![0usize; self.dim()];
        self.multi_index(flat, &mut multi);
        let mut point = vec![0.0; self.dim()];
        self.point_of(&multi, &mut point);
        point
    }

    /// Flat indices of the effective domain (finite values).
    pub fn finite_nodes(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i].is_finite()).collect()
    }

    /// Locate a point on the grid within an absolute per-coordinate
    /// tolerance; the match must be unique per axis.
    pub fn locate(&self, point: &[f64], tol: f64) -> Result<usize> {
        if point.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point dimension {} vs grid dimension {}",
                point.len(),
                self.dim()
            )));
        }
        let mut multi = vec![0usize; self.dim()];
        for c in 0..self.dim() {
            let axis = &self.axes[c];
            let hit = axis.iter().position(|&x| (x - point[c]).abs() <= tol);
            match hit {
                Some(i) => multi[c] = i,
                None => {
                    return Err(Error::Domain(format!(
                        "coordinate {} is not on axis {c}",
                        point[c]
                    )))
                }
            }
        }
        Ok(self.flat_index(&multi))
    }

    /// Per-axis spacing, requiring each axis to be uniform within a relative
    /// tolerance.
    pub fn uniform_steps(&self) -> Result<Vec<f64>> {
        let mut steps = Vec::with_capacity(self.dim());
        for (c, axis) in self.axes.iter().enumerate() {
            let step = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
            for w in axis.windows(2) {
                if ((w[1] - w[0]) - step).abs() > UNIFORM_REL_TOL * step.abs().max(1.0) {
                    return Err(Error::Domain(format!(
                        "axis {c} is not uniformly spaced; the delta search needs a uniform step"
                    )));
                }
            }
            steps.push(step);
        }
        Ok(steps)
    }

    /// True when both grids share identical axes.
    pub fn same_axes(&self, other: &GridFunction) -> bool {
        self.axes == other.axes
    }

    /// Midpoint convexity along every axis: for consecutive nodes `a < m < b`
    /// on one axis line, `f(m)` must not exceed the chord value, and the
    /// domain must have no one-node holes. Necessary for convexity of a
    /// continuous extension; it is what the duality checks require.
    pub fn assert_axis_convex(&self, tol: f64) -> Result<()> {
        let lens = self.lens();
        let mut multi = vec![0usize; self.dim()];
        for axis in 0..self.dim() {
            let stride = self.strides[axis];
            for flat in 0..self.values.len() {
                self.multi_index(flat, &mut multi);
                if multi[axis] + 2 >= lens[axis] {
                    continue;
                }
                let (va, vm, vb) =
                    (self.values[flat], self.values[flat + stride], self.values[flat + 2 * stride]);
                if !va.is_finite() || !vb.is_finite() {
                    continue;
                }
                let (xa, xm, xb) = (
                    self.axes[axis][multi[axis]],
                    self.axes[axis][multi[axis] + 1],
                    self.axes[axis][multi[axis] + 2],
                );
                let lambda = (xb - xm) / (xb - xa);
                let chord = lambda * va + (1.0 - lambda) * vb;
                if !(vm <= chord + tol) {
                    return Err(Error::Domain(format!(
                        "not axis-convex near {:?} along axis {axis}",
                        self.node_point(flat + stride)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Range of one-step difference quotients along `axis` over node pairs
    /// with finite values, or `None` when no finite pair exists.
    pub fn slope_range(&self, axis: usize) -> Option<(f64, f64)> {
        let lens = self.lens();
        let stride = self.strides[axis];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut multi = vec![0usize; self.dim()];
        for flat in 0..self.values.len() {
            self.multi_index(flat, &mut multi);
            if multi[axis] + 1 >= lens[axis] {
                continue;
            }
            let a = self.values[flat];
            let b = self.values[flat + stride];
            if !a.is_finite() || !b.is_finite() {
                continue;
            }
            let h = self.axes[axis][multi[axis] + 1] - self.axes[axis][multi[axis]];
            let s = (b - a) / h;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Serialize)]
struct GridSer<'a> {
    axes: &'a [Vec<f64>],
    #[serde(serialize_with = "serialize_ext_slice")]
    values: &'a [f64],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDe {
    axes: Vec<Vec<f64>>,
    #[serde(deserialize_with = "deserialize_ext_vec")]
    values: Vec<f64>,
}

impl Serialize for GridFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridSer { axes: &self.axes, values: &self.values }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = GridDe::deserialize(d)?;
        GridFunction::new(raw.axes, raw.values).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_both_endpoints() {
        let xs = linspace(-1.0, 1.0, 5);
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn sample_orders_values_row_major() {
        let g = GridFunction::sample(vec![vec![0.0, 1.0], vec![0.0, 1.0, 2.0]], |p| {
            10.0 * p[0] + p[1]
        })
        .unwrap();
        assert_eq!(g.values(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(g.flat_index(&[1, 2]), 5);
        let mut multi = [0usize; 2];
        g.multi_index(4, &mut multi);
        assert_eq!(multi, [1, 1]);
        assert_eq!(g.node_point(4), vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_axes_and_values() {
        assert!(GridFunction::new(vec![vec![0.0, 0.0]], vec![1.0, 2.0]).is_err());
        assert!(GridFunction::new(vec![vec![1.0, 0.0]], vec![1.0, 2.0]).is_err());
        assert!(GridFunction::new(vec![vec![0.0]], vec![1.0]).is_err());
        assert!(GridFunction::new(vec![vec![0.0, 1.0]], vec![f64::NEG_INFINITY, 0.0]).is_err());
        assert!(GridFunction::new(vec![vec![0.0, 1.0]], vec![f64::NAN, 0.0]).is_err());
        assert!(GridFunction::new(vec![vec![0.0, 1.0]], vec![0.0]).is_err());
        let all_inf = vec![f64::INFINITY, f64::INFINITY];
        assert!(GridFunction::new(vec![vec![0.0, 1.0]], all_inf).is_err());
    }

    #[test]
    fn plus_infinity_marks_the_domain() {
        let g = GridFunction::new(vec![vec![0.0, 1.0, 2.0]], vec![f64::INFINITY, 3.0, 4.0])
            .unwrap();
        assert_eq!(g.finite_nodes(), vec![1, 2]);
    }

    #[test]
    fn locate_respects_tolerance() {
        let g = GridFunction::sample(vec![linspace(0.0, 1.0, 5)], |p| p[0]).unwrap();
        assert_eq!(g.locate(&[0.25 + 1e-12], 1e-9).unwrap(), 1);
        assert!(g.locate(&[0.3], 1e-9).is_err());
    }

    #[test]
    fn uniform_steps_checks_spacing() {
        let g = GridFunction::sample(vec![linspace(-1.0, 1.0, 9)], |p| p[0] * p[0]).unwrap();
        assert!((g.uniform_steps().unwrap()[0] - 0.25).abs() < 1e-12);
        let bad =
            GridFunction::new(vec![vec![0.0, 1.0, 3.0]], vec![0.0, 0.0, 0.0]).unwrap();
        assert!(bad.uniform_steps().is_err());
    }

    #[test]
    fn axis_convexity_check() {
        let ok = GridFunction::sample(vec![linspace(-1.0, 1.0, 9)], |p| p[0].abs()).unwrap();
        assert!(ok.assert_axis_convex(1e-12).is_ok());
        let bad = GridFunction::sample(vec![linspace(-1.0, 1.0, 9)], |p| -p[0] * p[0]).unwrap();
        assert!(bad.assert_axis_convex(1e-12).is_err());
        // A one-node hole in the domain breaks lattice convexity.
        let hole = GridFunction::new(
            vec![vec![0.0, 1.0, 2.0]],
            vec![0.0, f64::INFINITY, 0.0],
        )
        .unwrap();
        assert!(hole.assert_axis_convex(1e-12).is_err());
    }

    #[test]
    fn slope_range_ignores_infinite_cells() {
        let g = GridFunction::new(
            vec![vec![0.0, 1.0, 2.0]],
            vec![0.0, 2.0, f64::INFINITY],
        )
        .unwrap();
        assert_eq!(g.slope_range(0), Some((2.0, 2.0)));
    }

    #[test]
    fn json_round_trip() {
        let g = GridFunction::new(vec![vec![0.0, 1.0]], vec![1.5, f64::INFINITY]).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: GridFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
    }
}
