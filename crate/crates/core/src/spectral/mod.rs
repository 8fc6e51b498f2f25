//! Spectral discretization of the periodic box.
//!
//! A run lives on the torus `[0, L)^n` sampled with `N` points per axis.
//! Frequencies form the lattice `xi_m = 2*pi*m/L` with integer coordinates
//! `m in [-N/2, N/2)`; the unpaired Nyquist row sits on the negative side and
//! is removed by the two-thirds dealiasing mask.  Transforms are unitary, so
//! the `l2` norm weighted by the cell volume `(L/N)^n` is identical in both
//! spaces (discrete Parseval identity).

mod field;
mod grid;
mod multiplier;
mod snapshot;
mod transform;

pub(crate) use field::{compensated_sum, Compensated};
pub use field::{SpaceTag, SpectralField};
pub use grid::Grid;
pub use multiplier::{
    apply_dealias, damped_propagator, dealias_mask, frac_laplacian, free_propagator,
    MultiplierCache,
};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use transform::{forward_transform, inverse_transform, TransformPlan, TransformScratch};
