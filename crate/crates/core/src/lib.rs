//! Pseudospectral simulation and verification toolkit for a damped stochastic
//! fractional Schrodinger equation on a periodic box.
//!
//! The model couples a fractional dispersion operator (a Fourier multiplier
//! `|xi|^(2*alpha)`), a focusing power nonlinearity `|u|^(2*sigma) u`, linear
//! damping `gamma`, a structural forcing term, and additive trace-class
//! Gaussian noise.  The crate provides:
//!
//! * spectral grids, transforms, multipliers, and propagators ([`spectral`]);
//! * the driving noise with a diagonal covariance on the real trigonometric
//!   basis ([`noise`]);
//! * model parameters, forcing families, and dispersive-exponent arithmetic
//!   ([`dynamics`]);
//! * stochastic time steppers with blow-up guards ([`integrator`]);
//! * statistical verification probes: mass-balance ledgers, expected-mass
//!   laws, moment bounds, mixed space-time norms, and absorbing-set entry
//!   probes ([`diagnostics`]);
//! * run configuration and artifact emission used by the CLI ([`config`],
//!   [`app`]).
//!
//! All numerical code is generic over the [`Real`] scalar; the aliases below
//! fix the two supported precisions.

pub mod app;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod noise;
pub mod scalar;
pub mod spectral;

pub use error::{Error, RegimeConstraint, Result};
pub use scalar::{Cplx, Real};

/// Double precision grid.
pub type Grid64 = spectral::Grid<f64>;
/// Single precision grid.
pub type Grid32 = spectral::Grid<f32>;
/// Double precision field.
pub type Field64 = spectral::SpectralField<f64>;
/// Single precision field.
pub type Field32 = spectral::SpectralField<f32>;
/// Double precision model parameters.
pub type ModelParams64 = dynamics::ModelParams<f64>;
/// Double precision covariance spec.
pub type CovarianceSpec64 = noise::CovarianceSpec<f64>;
/// Double precision trajectory.
pub type Trajectory64 = integrator::Trajectory<f64>;
