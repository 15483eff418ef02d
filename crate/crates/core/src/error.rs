use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dispersion relation is not strictly monotone on its domain")]
    NonMonotoneDispersion,
    #[error("could not invert the dispersion relation at {0}")]
    InversionFailure(f64),
    #[error("moment of order {order} does not converge")]
    DivergentMoment { order: usize },
    #[error("measure has zero (or negative) total mass")]
    ZeroMass,
    #[error("computation did not reach the requested accuracy: {0}")]
    IllConditioned(&'static str),
    #[error("index {index} out of range (available: {available})")]
    IndexOutOfRange { index: usize, available: usize },
    #[error("tridiagonal eigenvalue iteration failed to converge")]
    EigenFailure,
    #[error("evaluation point is too close to the support")]
    PoleTooClose,
    #[error("evaluation point {0} lies outside the admissible band of the support interior")]
    EndpointEvaluation(f64),
    #[error("operation requires a gapless support")]
    GappedMeasure,
    #[error("no sign change found in the gap")]
    BracketFailure,
    #[error("need {needed} moments, got {got}")]
    InsufficientMoments { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    DomainError(&'static str),
    #[error("operation not supported for this mapping: {0}")]
    UnsupportedMapping(&'static str),
    #[error("measure is outside the Szego class ({0})")]
    NotInSzegoClass(&'static str),
    #[error("operation does not accept measures with point masses")]
    PointMasses,
    #[error("measure is not normalized (total mass {0})")]
    NotNormalized(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
