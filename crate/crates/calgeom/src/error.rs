use alloc::string::String;

/// Errors raised by the library. Non-convergence is never an error; it is
/// reported through `converged` flags and indeterminate verdicts.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("capacity exceeded: n = {n}, p = {p} (n must be at most 12 and p at most n)")]
    Capacity { n: usize, p: usize },
    #[error("degree overflow: {p} + {q} exceeds dimension {n}")]
    DegreeOverflow { n: usize, p: usize, q: usize },
    #[error("frame is not orthonormal (defect {0:.3e})")]
    NotOrthonormal(f64),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no calibrated plane in the feasible set")]
    Infeasible,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("boundary is not strictly convex: tangential margin {margin:.3e}, witness plane {witness:?}")]
    NotStrictlyConvex { margin: f64, witness: Option<crate::grassmann::OrientedPlane> },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}
pub(crate) use shape_err;
