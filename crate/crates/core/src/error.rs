use thiserror::Error;

/// Errors produced by the compact representations, kernels and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("triangular matrix is singular at diagonal entry {index}")]
    SingularTriangular { index: usize },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("input contains non-finite values")]
    NonFiniteInput,

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("denominator vanished in rank-2 update ({value:.3e})")]
    ZeroDenominator { value: f64 },

    #[error("non-positive curvature s^T y = {value:.3e}")]
    NonPositiveCurvature { value: f64 },

    #[error("history is empty")]
    EmptyHistory,

    #[error("representation form {form} is incompatible with {reason}")]
    IncompatibleForm { form: &'static str, reason: &'static str },

    #[error("custom pair policy requires a parameter vector")]
    MissingParameterVector,

    #[error("shifted matrix is not positive definite (min eigenvalue + shift = {value:.3e})")]
    IndefiniteShift { value: f64 },

    #[error("dimension {0} is too large to materialize")]
    DimensionTooLarge(usize),

    #[error("rosenbrock requires an even dimension, got {0}")]
    OddDimension(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("search direction is not a descent direction (p^T g = {slope:.3e})")]
    NotDescent { slope: f64 },

    #[error("line search failed to find a strong Wolfe point after {evals} evaluations")]
    LineSearchFail { evals: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("tensor file: {0}")]
    TensorFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
