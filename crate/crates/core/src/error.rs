use alloc::string::String;

/// Errors produced by the numerical core.
///
/// Every variant describes an input outside the domain of the requested
/// computation; none of them are transient.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot} is {value}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its mirror")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix data has {found} entries, expected {expected}")]
    BadShape { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("split point {k} must satisfy 1 <= k < {dim}")]
    InvalidSplit { k: usize, dim: usize },

    #[error("invalid block partition: {0}")]
    InvalidPartition(&'static str),

    #[error("multivariate gamma argument beta = {beta} must exceed (p - 1)/2 = {bound} for p = {p}")]
    MultigammaDomain { p: usize, beta: f64, bound: f64 },

    #[error("gamma ratio shift must be finite and nonnegative, got {0}")]
    NegativeShift(f64),

    #[error("degrees of freedom alpha = {alpha} must satisfy alpha > p - 1 = {bound}")]
    AlphaOutOfRange { alpha: f64, bound: f64 },

    #[error("degrees of freedom alpha = {alpha} is outside the Gindikin set for p = {p}")]
    NotInGindikinSet { alpha: f64, p: usize },

    #[error("alpha = 0 gives a point mass at the zero matrix")]
    DegenerateAlpha,

    #[error("exponent nu[{index}] = {value} must be finite and nonnegative")]
    NegativeExponent { index: usize, value: f64 },

    #[error("exponent vector has {found} entries but the partition has {expected} blocks")]
    ExponentCount { expected: usize, found: usize },

    #[error("operation requires the nonsingular regime alpha > p - 1 (alpha = {alpha}, p = {p})")]
    SingularRegime { alpha: f64, p: usize },

    #[error("the Gaussian-sum sampler needs an integer alpha, got {0}")]
    NonIntegerAlpha(f64),

    #[error("scale matrix is not block-diagonal: entry ({row}, {col}) = {value}")]
    NotBlockDiagonal { row: usize, col: usize, value: f64 },

    #[error("correlation matrix must have unit diagonal: entry {index} is {value}")]
    NotCorrelation { index: usize, value: f64 },

    #[error("estimate has zero standard error but its mean differs from the exact value")]
    DegenerateEstimate,

    #[error("at least {min} samples are required, got {found}")]
    TooFewSamples { min: usize, found: usize },

    #[error("could not generate a positive definite matrix after {0} attempts")]
    RetriesExhausted(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
