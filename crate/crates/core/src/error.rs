//! Crate-wide error type.
//!
//! One enum covers grid construction, transform plumbing, noise setup,
//! model validation, integration, diagnostics, and configuration parsing.
//! Payloads are plain `f64`/`usize` so the enum stays non-generic even
//! though the numerical code is generic over the scalar.

use thiserror::Error;

/// Constraint names for the well-posedness regime of the model.
///
/// The simulator runs outside the regime on request; these names are used
/// when a regime-gated diagnostic refuses to certify anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeConstraint {
    /// alpha >= n / (2n - 1)
    AlphaLowerBound,
    /// alpha < 1
    AlphaUpperBound,
    /// sigma < 2 * alpha / (n - 2 * alpha)
    SigmaUpperBound,
    /// sigma >= 0
    SigmaNonnegative,
    /// gamma > beta
    GammaAboveBeta,
    /// n >= 2
    Dimension,
}

impl std::fmt::Display for RegimeConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RegimeConstraint::AlphaLowerBound => "alpha >= n/(2n-1)",
            RegimeConstraint::AlphaUpperBound => "alpha < 1",
            RegimeConstraint::SigmaUpperBound => "sigma < 2*alpha/(n-2*alpha)",
            RegimeConstraint::SigmaNonnegative => "sigma >= 0",
            RegimeConstraint::GammaAboveBeta => "gamma > beta",
            RegimeConstraint::Dimension => "n >= 2",
        };
        f.write_str(s)
    }
}

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spatial dimension {0} unsupported (expected 1, 2, or 3)")]
    DimensionOutOfRange(usize),

    #[error("points per dimension {0} must be a power of two >= 2")]
    PointsNotPowerOfTwo(usize),

    #[error("box length {0} must be positive and finite")]
    BadBoxLength(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field is in {found} space, expected {expected}")]
    SpaceMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("fractional exponent alpha {0} outside (0, 1]")]
    BadAlpha(f64),

    #[error("Lp exponent {0} must be >= 1")]
    BadLpExponent(f64),

    #[error("damping gamma {0} must be >= 0 and finite")]
    BadGamma(f64),

    #[error("nonlinearity exponent sigma {0} must be >= 0 and finite")]
    BadSigma(f64),

    #[error("snapshot file malformed: {0}")]
    SnapshotFormat(String),

    #[error("covariance spec invalid: {0}")]
    BadCovariance(String),

    #[error("forcing spec invalid: {0}")]
    BadForcing(String),

    #[error("well-posedness constraint violated: {0}")]
    RegimeViolation(RegimeConstraint),

    #[error("propagation time {0} must be >= 0 and finite")]
    BadPropagationTime(f64),

    #[error("time step {0} must be positive and finite")]
    BadTimeStep(f64),

    #[error("time span [{t0}, {t1}] is not an integer multiple of dt {dt}")]
    SpanNotCommensurate { t0: f64, t1: f64, dt: f64 },

    #[error(
        "blow-up detected at t~{t_estimate}: discrete mass {mass} exceeded threshold {threshold}"
    )]
    BlowupDetected {
        t_estimate: f64,
        mass: f64,
        threshold: f64,
        consecutive_growth_steps: usize,
    },

    #[error("trajectory lacks a complete increment log")]
    IncrementLogMissing,

    #[error("trajectory lacks per-mode projections needed for moment order m >= 2")]
    ModeProjectionsMissing,

    #[error("mixed-norm evaluation needs at least {need} snapshots, trajectory has {have}")]
    TooFewSnapshots { have: usize, need: usize },

    #[error("forcing bound integral diverges: {0}")]
    DivergentForcingIntegral(String),

    #[error("ensemble is empty or has inconsistent time grids")]
    BadEnsemble(String),

    #[error("moment order m = {0} must be >= 1")]
    BadMomentOrder(usize),

    #[error("moment exponent rho = {0} must be >= 2 and finite")]
    BadMomentExponent(f64),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error("config key `{0}` is required but missing")]
    ConfigMissing(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
