use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {0:?} lies outside the map domain")]
    Domain(Vec<f64>),
    #[error("finite-difference stencil around {0:?} leaves the map domain")]
    Derivative(Vec<f64>),
    #[error("hodograph matrix is singular (|det| = {det:e})")]
    Singular { det: f64 },
    #[error("degenerate root (|D1| = {d1:e}); simple-pole formulas do not apply")]
    Degenerate { d1: f64 },
    #[error("no positive blowup time found in the searched region")]
    NoBlowup,
    #[error("no sign change of the degeneracy function found")]
    EmptyLocus,
    #[error("matrix has full rank; no null space")]
    FullRank,
    #[error("another root lies within the fitting window (distance {distance:e})")]
    Window { distance: f64 },
    #[error("Newton iteration did not converge (residual {residual:e})")]
    NoConvergence { best: Vec<f64>, residual: f64 },
    #[error("converged point {0:?} violates the branch sign conditions")]
    BranchViolation(Vec<f64>),
    #[error("Newton step hit a near-singular hodograph matrix (|det| = {det:e})")]
    SingularNewton { det: f64 },
    #[error("another blowup sheet crosses the ray inside the window")]
    Contamination,
    #[error("vorticity vanishes; no direction defined")]
    ZeroVorticity,
    #[error("{0} is not available for this map")]
    NotAvailable(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("expression error: {0}")]
    Expr(String),
    #[error("map specification error: {0}")]
    Spec(String),
    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
