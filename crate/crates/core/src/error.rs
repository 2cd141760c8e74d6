//! Error taxonomy shared by every module.

use thiserror::Error;

/// Unified error type for factorization, kernel, operator, verification, and
/// solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("degenerate block: {0}")]
    DegenerateBlock(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mapping is not differentiable at the requested point: {0}")]
    NotSmooth(String),
    #[error("capability missing: {0}")]
    CapabilityMissing(String),
    #[error("jacobian structure violation: {0}")]
    Structure(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("factorization did not converge: {0}")]
    NonConvergence(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("no smooth sample point found: {0}")]
    NoSmoothPointFound(String),
    #[error("maximum iterations exceeded: {0}")]
    MaxIterExceeded(String),
    #[error("newton system is singular: {0}")]
    SingularNewtonSystem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
