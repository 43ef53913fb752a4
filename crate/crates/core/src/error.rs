use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |H - H^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigensolver failed to converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate spectrum: g = 0 at t = 0 has no unique instantaneous basis")]
    DegenerateSpectrum,

    #[error("invalid time window [{start}, {end}]")]
    InvalidWindow { start: f64, end: f64 },

    #[error("state invariant violated at t = {t}: {detail} (try a smaller dt or a larger n_max)")]
    InvariantViolation { t: f64, detail: String },

    #[error("norm drift {drift:e} exceeds {tol:e}: step size too coarse")]
    NormDrift { drift: f64, tol: f64 },

    #[error("pulses overlap: spacing {delta_t} must exceed duration {t_p}")]
    OverlappingPulses { delta_t: f64, t_p: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
