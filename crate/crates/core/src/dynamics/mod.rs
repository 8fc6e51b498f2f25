//! Model coefficient algebra: the power nonlinearity, forcing families
//! with certified growth bounds, parameter-regime validation, and the
//! admissible-pair arithmetic for mixed space-time norms.
//!
//! Everything here is pure and shareable; specs are immutable after
//! construction and cheap to clone.

mod admissible;
mod forcing;
mod nonlinearity;
mod params;

pub use admissible::{admissible_pair, AdmissiblePair};
pub use forcing::{
    check_assumptions, forcing_eval, AssumptionReport, CustomForcing, ForcingFamily, ForcingSpec,
};
pub use nonlinearity::{nonlinearity, nonlinearity_into, rotate_nonlinear_phase};
pub use params::{validate_regime, ModelParams, RegimeReport};
