use crate::C64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("size overflow: {required} sites exceeds the cap of {cap}")]
    SizeOverflow { required: usize, cap: usize },

    #[error("invalid tiling: {0}")]
    InvalidTiling(String),

    #[error("operator is not exactly Hermitian at ({row}, {col})")]
    NotHermitian { row: usize, col: usize },

    #[error(
        "perturbation block {index} is not positive semidefinite (min eigenvalue {min_eig:e})"
    )]
    NotPositive { index: usize, min_eig: f64 },

    #[error("near-singular solve at z = {z}: {detail}")]
    NearSingular { z: C64, detail: String },

    #[error("singular update factor: |det(I + lambda C G)| = {det_abs:e}")]
    SingularUpdate { det_abs: f64 },

    #[error("singular Schur complement for block {block}")]
    SingularSchur { block: usize },

    #[error("limit not attained at E = {energy}: successive differences grow (last {last_difference:e})")]
    LimitNotAttained { energy: f64, last_difference: f64 },

    #[error("spectral point: E = {0} is an exact eigenvalue")]
    SpectralPoint(String),

    #[error("E = {energy} is within {distance:e} of the spectrum")]
    TooCloseToSpectrum { energy: f64, distance: f64 },

    #[error("atoms unresolved: neighbouring atom at distance {distance:e} below resolution {resolution:e}")]
    AtomsUnresolved { distance: f64, resolution: f64 },

    #[error("degenerate spectrum: minimum gap {gap:e} not above {tol:e}")]
    DegenerateSpectrum { gap: f64, tol: f64 },

    #[error("input is not an eigenpair (residual {residual:e})")]
    NotEigenpair { residual: f64 },

    #[error("eigenvalue tracking failed: {0}")]
    TrackingFailure(String),

    #[error("continued-fraction recursion hit a pole at vertex {vertex}")]
    RecursionPole { vertex: usize },

    #[error("exact path needs real rational entries: {0}")]
    NotReal(String),

    #[error("invalid model document at {path}: {message}")]
    InvalidDocument { path: String, message: String },
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn doc(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidDocument {
            path: path.into(),
            message: message.into(),
        }
    }
}
