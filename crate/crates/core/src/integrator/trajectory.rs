//! Recorded output of a single sample path.

use crate::error::{Error, Result};
use crate::integrator::cache::SchemeId;
use crate::scalar::Real;
use crate::spectral::{Grid, SpectralField};

/// How much per-step data a run records.
///
/// Mass is always recorded every step.  The ledger level adds the
/// left-endpoint pairings and raw noise coefficients needed to replay the
/// stochastic mass balance; the mode level additionally records per-mode
/// projections needed by the quadratic-variation term of higher moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingLevel {
    MassOnly,
    Ledger,
    LedgerWithModes,
}

impl RecordingLevel {
    pub(crate) fn wants_ledger(self) -> bool {
        !matches!(self, RecordingLevel::MassOnly)
    }

    pub(crate) fn wants_modes(self) -> bool {
        matches!(self, RecordingLevel::LedgerWithModes)
    }
}

/// When to store full field snapshots along a run.
#[derive(Debug, Clone)]
pub enum SnapshotSchedule<T> {
    /// Final state only (always kept).
    None,
    /// Steps `0, k, 2k, ...` plus the final step.
    EveryKSteps(usize),
    /// Nearest step to each requested time (deduplicated).
    AtTimes(Vec<T>),
}

impl<T: Real> SnapshotSchedule<T> {
    /// Resolve to a sorted, deduplicated list of step indices in
    /// `0..=steps`.
    pub(crate) fn resolve(&self, t0: T, dt: T, steps: usize) -> Result<Vec<usize>> {
        match self {
            SnapshotSchedule::None => Ok(Vec::new()),
            SnapshotSchedule::EveryKSteps(k) => {
                if *k == 0 {
                    return Err(Error::ConfigValue {
                        key: "run.snapshots".into(),
                        message: "snapshot interval must be >= 1 step".into(),
                    });
                }
                let mut out: Vec<usize> = (0..=steps).step_by(*k).collect();
                if *out.last().unwrap() != steps {
                    out.push(steps);
                }
                Ok(out)
            }
            SnapshotSchedule::AtTimes(times) => {
                let mut out = Vec::with_capacity(times.len());
                for &t in times {
                    let rel = (t - t0) / dt;
                    let idx = rel.round().as_f64();
                    if !(0.0..=(steps as f64)).contains(&idx) {
                        return Err(Error::ConfigValue {
                            key: "run.snapshots".into(),
                            message: format!(
                                "snapshot time {} outside the simulated span",
                                t.as_f64()
                            ),
                        });
                    }
                    out.push(idx as usize);
                }
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// The mass guard tripped; the trajectory is truncated at the trip.
    Blowup {
        t_estimate: f64,
        mass: f64,
        threshold: f64,
        consecutive_growth_steps: usize,
        /// Whether the trip followed a growth streak at least as long as
        /// the guard's annotation limit.
        sustained: bool,
    },
}

/// One simulated path: the mass series, optional ledger data, snapshots,
/// and the final state.
///
/// Ledger vectors are per *step* (length = completed steps); `times` and
/// `masses` are per *sample* (steps + 1).  `noise_coeffs` and
/// `mode_projections` are step-major with `mode_count` entries per step.
pub struct Trajectory<T> {
    pub(crate) grid: Grid<T>,
    pub(crate) scheme: SchemeId,
    pub(crate) path_index: u64,
    pub(crate) dt: T,
    pub(crate) gamma: T,
    pub(crate) recording: RecordingLevel,
    pub(crate) times: Vec<T>,
    pub(crate) masses: Vec<T>,
    pub(crate) im_u_dw: Option<Vec<T>>,
    pub(crate) im_u_f: Option<Vec<T>>,
    pub(crate) noise_coeffs: Option<Vec<T>>,
    pub(crate) mode_projections: Option<Vec<T>>,
    pub(crate) noise_amplitudes: Vec<T>,
    pub(crate) hs_norm_sq: T,
    pub(crate) snapshots: Vec<(T, SpectralField<T>)>,
    pub(crate) final_state: SpectralField<T>,
    pub(crate) termination: Termination,
}

impl<T: Real> Trajectory<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Damping coefficient of the run that produced this trajectory.
    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn recording(&self) -> RecordingLevel {
        self.recording
    }

    /// Sample times `t_0 .. t_S` (`S` completed steps).
    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Discrete mass `||u||^2` at each sample time.
    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn steps_completed(&self) -> usize {
        self.times.len() - 1
    }

    /// Left-endpoint pairings `Im(u_j, dW_j)`, one per step.
    pub fn im_u_dw(&self) -> Option<&[T]> {
        self.im_u_dw.as_deref()
    }

    /// Left-endpoint pairings `Im(u_j, f(t_j, u_j))`, one per step.
    pub fn im_u_f(&self) -> Option<&[T]> {
        self.im_u_f.as_deref()
    }

    /// Raw per-mode noise coefficients, step-major.
    pub fn noise_coeffs(&self) -> Option<&[T]> {
        self.noise_coeffs.as_deref()
    }

    /// Left-endpoint projections `Im(u_j, e_k)`, step-major.
    pub fn mode_projections(&self) -> Option<&[T]> {
        self.mode_projections.as_deref()
    }

    /// Covariance amplitudes `phi_k` of the driving noise (empty for
    /// deterministic runs).
    pub fn noise_amplitudes(&self) -> &[T] {
        &self.noise_amplitudes
    }

    pub fn mode_count(&self) -> usize {
        self.noise_amplitudes.len()
    }

    /// Squared Hilbert-Schmidt norm of the driving covariance.
    pub fn hs_norm_sq(&self) -> T {
        self.hs_norm_sq
    }

    pub fn snapshots(&self) -> &[(T, SpectralField<T>)] {
        &self.snapshots
    }

    /// State at the last recorded time (the trip sample for blow-ups).
    pub fn final_state(&self) -> &SpectralField<T> {
        &self.final_state
    }

    pub fn termination(&self) -> &Termination {
        &self.termination
    }

    pub fn completed(&self) -> bool {
        matches!(self.termination, Termination::Completed)
    }

    /// `Ok` for completed runs; the blow-up error otherwise.
    pub fn ensure_completed(&self) -> Result<()> {
        match self.termination {
            Termination::Completed => Ok(()),
            Termination::Blowup {
                t_estimate,
                mass,
                threshold,
                consecutive_growth_steps,
                ..
            } => Err(Error::BlowupDetected {
                t_estimate,
                mass,
                threshold,
                consecutive_growth_steps,
            }),
        }
    }

    /// The per-step ledger series `(im_u_dw, im_u_f, noise_coeffs)`;
    /// errors when the run recorded masses only.
    pub fn ledger_series(&self) -> Result<(&[T], &[T], &[T])> {
        match (&self.im_u_dw, &self.im_u_f, &self.noise_coeffs) {
            (Some(dw), Some(f), Some(nc)) => Ok((dw, f, nc)),
            _ => Err(Error::IncrementLogMissing),
        }
    }
}
