//! Verification layer: every checkable identity and bound the model
//! admits, evaluated against simulated trajectories.
//!
//! The checks are organized around five questions:
//!
//! * does the discrete mass balance close pathwise (Ito ledger)?
//! * does the ensemble mean mass follow its ODE / closed form?
//! * do higher moments stay under the explicit-constant bound?
//! * are mixed space-time norms finite on admissible exponent pairs?
//! * do trajectories enter the absorbing ball, and when?
//!
//! Ensemble reductions are deterministic folds in path-index order, so
//! results do not depend on the parallel schedule that produced the
//! trajectories.

mod absorb;
mod ensemble;
mod mass_balance;
mod moments;
mod strichartz;

pub use absorb::{
    absorbing_radius, pullback_absorption_probe, AbsorbingProbe, AbsorptionReport, ProbeCell,
    Psi1Schedule,
};
pub use ensemble::{mass_moment_stats, run_ensemble, SeriesStats};
pub use mass_balance::{
    expected_mass_check, expected_mass_reference, ito_mass_residual, nonlinear_mass_contribution,
    ExpectedMassReport, MassLawKind, MassLedger,
};
pub use moments::{moment_bound_check, moment_bound_constants, MomentBoundReport};
pub use strichartz::strichartz_norm;
