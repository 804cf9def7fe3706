use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    InvalidInput,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown factor label `{0}`")]
    UnknownFactor(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),
    #[error("operator is not Hermitian (relative deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cross-block gap {gap:.3e} GHz is below the degeneracy tolerance {tol:.1e} GHz")]
    Degenerate { gap: f64, tol: f64 },
    #[error("eigenstate matching failed: {0}")]
    Matching(String),
    #[error("resonance pole: |omega'_r - omega'_z| = {0:.3e} GHz")]
    ResonancePole(f64),
    #[error("root not bracketed: {0}")]
    NoBracket(String),
    #[error("oscillation fit failed: {0}")]
    Fit(String),
    #[error("time {t} ns lies outside [0, {span}] ns")]
    OutOfSpan { t: f64, span: f64 },
    #[error("time {0} ns is not a sample of the trajectory")]
    NotOnGrid(f64),
    #[error("invalid pulse schedule: {0}")]
    Schedule(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::Schedule(_)
            | Error::UnknownFactor(_)
            | Error::InvalidSpace(_)
            | Error::DimensionMismatch { .. }
            | Error::OutOfSpan { .. }
            | Error::NotOnGrid(_) => ErrorKind::InvalidInput,
            _ => ErrorKind::Numerical,
        }
    }
}
