use thiserror::Error;

/// Errors surfaced by the simulation and extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violated one of its invariants.
    #[error("invalid config: field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// The arm-balance condition has no solution for the given detection
    /// parameters (target |d00|^2 outside (0, 1]).
    #[error("balance has no solution: target |d00|^2 = {target}")]
    NoBalanceSolution { target: f64 },

    /// LO-on variance came out smaller than LO-off variance.
    #[error("inconsistent calibration: var(lo_on) = {var_on} < var(lo_off) = {var_off}")]
    InconsistentCalibration { var_on: f64, var_off: f64 },

    /// The leftover-hash-lemma bound leaves no room for output bits.
    #[error("insufficient entropy: k*h_min/n - 2*log2(1/eps) = {bound} <= 0")]
    InsufficientEntropy { bound: f64 },

    /// Bit-block or seed length did not match the declared geometry.
    #[error("length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Input too short for the requested statistical test.
    #[error("input too short: need at least {min} bits, got {got}")]
    TooShort { min: usize, got: usize },

    /// Requested extraction violates the leftover hash lemma sizing.
    #[error("extraction refused: {0}")]
    ExtractionRefused(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
