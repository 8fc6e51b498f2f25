//! Time-stepping schemes for the damped stochastic model, with recorded
//! noise increments and a blow-up guard.
//!
//! Two schemes are provided.  The exponential Euler scheme applies the
//! exact damped linear propagator to an Ito (left-endpoint) bracket of the
//! nonlinear, forcing, and noise contributions.  The Strang scheme splits
//! the step as half-propagator, exact nonlinear phase rotation, Euler
//! injection of forcing and noise, half-propagator; with no damping,
//! forcing, or noise both substeps preserve the discrete mass to roundoff.
//!
//! Both schemes draw exactly one Wiener increment per step in the same
//! order, so a shared `(seed, path index)` produces identical noise for
//! scheme cross-validation.  Linear runs (`sigma = 0`, zero forcing) are
//! automatically executed in frequency space, where the propagator is a
//! diagonal multiply and noise injection touches only the few driven
//! modes; results are exact-algebra equal to the physical-space route up
//! to FFT roundoff.

mod cache;
mod fast;
mod guard;
mod runner;
mod stepper;
mod trajectory;

pub use cache::{suggested_dt, SchemeId, StepperCache};
pub use guard::BlowupGuard;
pub use runner::{run_path, run_path_with_source, RunSetup};
pub use stepper::{StepRecord, Stepper};
pub use trajectory::{RecordingLevel, SnapshotSchedule, Termination, Trajectory};
