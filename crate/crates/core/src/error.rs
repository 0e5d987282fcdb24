use thiserror::Error;

pub type Result<T, E = VnlwError> = std::result::Result<T, E>;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VnlwError {
    #[error("degenerate interval: x_max ({x_max}) must exceed x_min ({x_min})")]
    DegenerateInterval { x_min: f64, x_max: f64 },

    #[error("too few grid points: {n_points} (need at least {min})")]
    TooFewPoints { n_points: usize, min: usize },

    #[error("tabulated potential has {got} values, grid has {expected} points")]
    TabulatedLengthMismatch { expected: usize, got: usize },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{name} must be positive and finite, got {value}")]
    NonpositiveConstant { name: &'static str, value: f64 },

    #[error(
        "eigensolver failed to converge for state {index} after {iterations} iterations \
         (residual {residual:.3e}, bound {bound:.3e})"
    )]
    ConvergenceFailure {
        index: usize,
        iterations: usize,
        residual: f64,
        bound: f64,
    },

    #[error("requested {k} states, valid range is 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("difference operator of dimension {dim} exceeds limit {max_dim}")]
    DimensionTooLarge { dim: usize, max_dim: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("state is not normalized (norm² = {norm_sq})")]
    UnnormalizedState { norm_sq: f64 },

    #[error("operator is not Hermitian: expectation has imaginary part {imag:.3e}")]
    NonHermitianOperator { imag: f64 },

    #[error("two-slit coefficients are not normalized (Σ|a|² = {sum})")]
    NonNormalizedCoefficients { sum: f64 },

    #[error("slit modes are not orthonormal (|<ψ1,ψ2>| = {overlap:.3e})")]
    NonOrthogonalModes { overlap: f64 },

    #[error("visibility window is empty or outside the grid")]
    EmptyWindow,

    #[error("invalid propagator configuration: {0}")]
    InvalidPropagator(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}
