use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("entries length {len} does not match dimension {dim} (expected {dim}²)")]
    BadShape { dim: usize, len: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("not Hermitian (max |H - H†| = {0:.3e})")]
    NotHermitian(f64),

    #[error("negative eigenvalue {0:.3e}")]
    NegativeEigenvalue(f64),

    #[error("trace is {0} (expected 1)")]
    BadTrace(f64),

    #[error("invalid probability vector: {0}")]
    BadProbabilities(String),

    #[error("rank {rank} outside [1, {dim}]")]
    BadRank { rank: usize, dim: usize },

    #[error("alpha = {0} outside (0, 2]")]
    BadAlpha(f64),

    #[error("Kraus operators violate completeness (max deviation {0:.3e})")]
    NotComplete(f64),

    #[error("channel is not incoherent")]
    NotIncoherentChannel,

    #[error("channel has no Kraus operators")]
    EmptyChannel,

    #[error("all diagonal entries of rho^alpha vanish")]
    DegenerateDiagonal,

    #[error("brute-force oracle supports d in {{2, 3}}, got {0}")]
    DimTooLarge(usize),

    #[error("oracle resolution {0} outside [1e-5, 1e-2]")]
    BadResolution(f64),

    #[error("ensemble weights invalid: {0}")]
    BadWeights(String),

    #[error("invalid trial configuration: {0}")]
    BadConfig(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
