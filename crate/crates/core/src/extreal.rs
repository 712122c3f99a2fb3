//! Extended-real arithmetic on `f64`.
//!
//! Values in `[-inf, +inf]` are stored as plain `f64` using the IEEE
//! infinities; NaN is never a legal value. The one place IEEE semantics are
//! overridden is multiplication: products use the convention `0 * inf = 0`,
//! so a zero mass matched with an infinite transfer contributes nothing.

/// Product with the convention `0 * (+-inf) = 0`.
#[inline]
pub fn ext_mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Dot product of two slices under [`ext_mul`]. Infinite terms of opposite
/// signs make the sum NaN; callers guarantee that does not happen.
pub fn ext_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| ext_mul(x, y)).sum()
}

/// True if `x` is neither NaN nor infinite.
#[inline]
pub fn is_finite(x: f64) -> bool {
    x.is_finite()
}

/// Clamp tiny negatives produced by rounding up to zero; leaves other
/// values untouched.
#[inline]
pub fn snap_nonneg(x: f64, tol: f64) -> f64 {
    if x < 0.0 && x >= -tol {
        0.0
    } else {
        x
    }
}
