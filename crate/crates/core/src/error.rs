use thiserror::Error;

/// Crate-wide error type.
///
/// Numerical routines return `Error` only for conditions the caller can act
/// on (bad arguments, singular geometry, unmeetable requirements). Ordinary
/// solver outcomes such as "the energy requirement cannot be met at this
/// power budget" are *data*, reported through status fields, not errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Source and observation point closer than the λ/100 self-interaction
    /// guard; the dyadic kernel diverges as 1/r³ there.
    #[error("singular geometry: ‖r−s‖ = {dist:.3e} m is below the λ/100 guard ({guard:.3e} m)")]
    SingularGeometry { dist: f64, guard: f64 },

    /// A channel or field with no usable signal direction (e.g. zero Gram
    /// matrix) where a dominant direction is required.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// A hard requirement that no admissible input can satisfy (e.g. a
    /// harvest target at or above the rectifier saturation level).
    #[error("infeasible requirement: {0}")]
    InfeasibleRequirement(String),

    /// Spatial grid too coarse for the requested operation (mode aliasing,
    /// empty antenna footprints, …). The message states the required size.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
