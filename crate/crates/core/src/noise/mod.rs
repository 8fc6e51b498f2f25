//! Additive trace-class noise on the real trigonometric basis.
//!
//! The driving Wiener process is `W(t) = sum_k phi_k beta_k(t) e_k` with
//! independent scalar Brownian motions `beta_k` and a diagonal covariance on
//! the orthonormal real basis of the box: the constant mode plus
//! cosine/sine pairs for each canonical frequency.  Increments are real
//! valued by construction and their energy obeys
//! `E ||dW||^2 = dt * sum_k phi_k^2 = dt * ||Phi||_HS^2` exactly, because the
//! discrete basis vectors are orthonormal under the cell-volume inner
//! product.
//!
//! Basis frequencies are capped at the two-thirds dealiasing band, so the
//! dealiasing filter used by the integrators never removes injected noise
//! and the Hilbert-Schmidt bookkeeping stays exact.

mod basis;
mod check;
mod covariance;
mod stream;

pub use basis::{BasisMode, ModeKind};
pub use check::{covariance_check, CovarianceReport, ModeCheck};
pub use covariance::CovarianceSpec;
pub use stream::{BrownianPath, NoiseSource, NoiseStream, WienerIncrement};
