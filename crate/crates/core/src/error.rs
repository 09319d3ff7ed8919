use thiserror::Error;

/// Errors surfaced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("time index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("kernel horizon {have} too small, need at least {need} (rebuild with a larger n_max)")]
    KernelHorizon { have: usize, need: usize },

    #[error("horizon mismatch: disorder length {disorder} < requested horizon {requested}")]
    HorizonMismatch { disorder: usize, requested: usize },

    #[error("horizon {n} exceeds the quadratic-cost cap {cap}; reduce n or split over replicas")]
    HorizonCap { n: usize, cap: usize },

    #[error("rejection budget exhausted after {attempts} attempts (segment length {len})")]
    RejectionBudget { attempts: usize, len: usize },

    #[error("skeleton resampling cap {cap} exhausted; last fill failed after {attempts} attempts")]
    SkeletonResampleCap { cap: usize, attempts: usize },

    #[error("instance too large for path enumeration: 2^(d*n) = 2^{bits} exceeds 2^24")]
    InstanceTooLarge { bits: u32 },

    #[error("operation requires d = 1, got d = {0}")]
    NotOneDimensional(u32),

    #[error("operation requires d >= 3, got d = {0}")]
    NotTransient(u32),

    #[error("bisection bracket endpoint {end} at h = {h} classified {verdict} (psi_hat = {psi_hat}, stderr = {stderr})")]
    BracketEndpoint {
        end: &'static str,
        h: f64,
        verdict: String,
        psi_hat: f64,
        stderr: f64,
    },

    #[error("too few tail bins beyond onset {onset} ({bins} usable, need {need})")]
    TooFewTailBins { onset: f64, bins: usize, need: usize },

    #[error("malformed disorder dump: {0}")]
    DisorderDump(String),
}
