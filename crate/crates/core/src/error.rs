use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("all entries carry zero probability mass")]
    AllZeroMass,
    #[error("model space with {p_free} free slots exceeds the enumeration cap of 20")]
    ModelSpaceTooLarge { p_free: usize },
    #[error("design matrix restricted to the active columns is singular")]
    SingularDesign,
    #[error("estimated dispersion {sigma2:e} is below 1e-12")]
    SingularDispersion { sigma2: f64 },
    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("bread matrix of the sandwich estimator is singular")]
    SingularBread,
    #[error("quadrature supports at most 3 active dimensions, got {dim}")]
    DimensionTooLarge { dim: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),
    #[error("at least 2 draws are required for pooling, got {0}")]
    InsufficientDraws(usize),
    #[error("data augmentation chain stalled after repeated failed model draws")]
    ChainStalled,
    #[error("the sample is empty")]
    EmptySample,
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}
