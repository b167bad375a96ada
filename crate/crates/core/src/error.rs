use thiserror::Error;

/// Errors raised by the potential, duality and bundle machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} is not interior to the domain")]
    Domain { point: Vec<f64> },

    #[error("finite-difference stencil around {point:?} leaves the domain")]
    Stencil { point: Vec<f64> },

    #[error("not strictly convex at {point:?}: smallest Hessian eigenvalue {min_eigenvalue:e}")]
    Convexity { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("Newton solve did not converge after {iterations} iterations (gradient residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("index {index} out of range for {len} outcomes")]
    Index { index: usize, len: usize },

    #[error("series truncation orders differ: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("invalid leading coefficient {0} for this series operation")]
    InvalidLeadingCoefficient(f64),

    #[error("state norm {norm} deviates from 1 by more than {tolerance:e}")]
    Normalization { norm: f64, tolerance: f64 },

    #[error("sufficient statistic has affine rank {rank}, expected {dim}")]
    DegenerateStatistic { rank: usize, dim: usize },

    #[error("non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("invalid descriptor: {0}")]
    Descriptor(String),
}

pub type Result<T> = std::result::Result<T, Error>;
