//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("improper transfer function: numerator degree {num_deg} > denominator degree {den_deg}")]
    ImproperTransferFunction { num_deg: usize, den_deg: usize },

    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("algebraic loop: feedback interconnection is not well-posed")]
    AlgebraicLoop,

    #[error("evaluation at pole: grid frequency {omega} rad/s coincides with a system pole")]
    EvaluationAtPole { omega: f64 },

    #[error("H-infinity norm undefined for unstable system (max Re(pole) = {max_re})")]
    UnstableSystem { max_re: f64 },

    #[error("discretization failed: (I - A*Ts/2) is singular")]
    SingularDiscretization,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("simulation diverged at t = {t} s (state magnitude exceeded {limit})")]
    SimulationDiverged { t: f64, limit: f64 },

    #[error("LF tuning failed: {0}")]
    LfTuningFailed(String),

    #[error("synthesis failed: {0}")]
    SynthesisFailed(String),

    #[error("identification failed: {0}")]
    IdentificationFailed(String),

    #[error("no -3 dB crossing found below {limit} rad/s")]
    NoCutoff { limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
