//! Monotone comparative statics for substitutable demand, and aggregated
//! deferred acceptance over welfare functions.
//!
//! The crate has four layers:
//!
//! * [`model`]: market instances, matchings, and classical equilibrium checks.
//! * [`orders`] / [`sets`] / [`conjugate`]: grid-sampled convex functions and
//!   finite point sets, with brute-force checks for submodularity, the
//!   exchange (Q) and lattice (P) preorders, matrons, M-natural sets,
//!   paramodular pairs, and Legendre transforms.
//! * [`welfare`] / [`lcp`]: welfare functions given by their Fenchel data
//!   (value, conjugate, capped demand, multipliers), with a closed-form logit
//!   instance, a quadratic instance backed by a complementarity solver, and a
//!   grid oracle instance.
//! * [`da`]: the aggregate deferred acceptance iteration between two welfare
//!   functions, trace invariants, and generalized equilibrium extraction.
//!
//! All randomized checks are deterministic given the seed recorded in their
//! reports. Matrices use extended-real entries where stated; the convention
//! `0 * inf = 0` from [`extreal`] applies to every inner product.

pub mod conjugate;
pub mod da;
pub mod extreal;
pub mod grid;
pub mod lcp;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod orders;
pub mod scan;
pub mod sets;
pub mod welfare;

pub use matrix::Matrix;

/// Errors shared across the crate. Checks report violations in their result
/// types; an `Error` means the inputs or the solver state were unusable.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimension mismatch between arguments.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Input outside the documented domain (non-finite mass, NaN entry,
    /// non-increasing axis, empty effective domain).
    #[error("domain error: {0}")]
    Domain(String),
    /// An enumeration would exceed the configured budget or a hard cap.
    #[error("size budget exceeded: {0}")]
    Size(String),
    /// A linear solve met a pivot too small to trust.
    #[error("conditioning failure: {0}")]
    Conditioning(String),
    /// An iterative solver ran out of iterations; carries the last residual.
    #[error("iteration limit reached: residual {residual:.3e} after {iterations} iterations")]
    IterationLimit { iterations: usize, residual: f64 },
    /// The call does not apply to the state it was given.
    #[error("state error: {0}")]
    State(String),
    /// A welfare function violated its contract mid-run.
    #[error("solver integrity: {0}")]
    Integrity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
