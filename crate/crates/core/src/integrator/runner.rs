//! Single-path time stepping: span validation, scheme dispatch, ledger
//! recording, snapshot capture, and blow-up packaging.
//!
//! `run_path` draws fresh noise from a seeded stream; `run_path_with_source`
//! accepts any [`NoiseSource`], which is how frozen-path refinement studies
//! couple several step sizes to one Brownian path.  A run that trips the
//! mass guard still returns `Ok`: the truncated trajectory carries a
//! [`Termination::Blowup`] record and `ensure_completed` reconstitutes the
//! error for callers that need a hard failure.

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::integrator::cache::SchemeId;
use crate::integrator::fast::FastStepper;
use crate::integrator::guard::BlowupGuard;
use crate::integrator::stepper::{StepRecord, Stepper};
use crate::integrator::trajectory::{RecordingLevel, SnapshotSchedule, Termination, Trajectory};
use crate::noise::{CovarianceSpec, NoiseSource, NoiseStream, WienerIncrement};
use crate::scalar::Real;
use crate::spectral::{Grid, SpectralField};

/// Everything that defines a single run apart from the model, the noise,
/// and the initial state.
#[derive(Debug, Clone)]
pub struct RunSetup<T> {
    pub scheme: SchemeId,
    pub t0: T,
    pub t1: T,
    pub dt: T,
    pub recording: RecordingLevel,
    pub snapshots: SnapshotSchedule<T>,
    pub guard: BlowupGuard<T>,
    /// Permit the frequency-space shortcut for linear, unforced runs.
    /// Disabling it forces the generic stepper (useful for cross-checks).
    pub allow_fast_path: bool,
}

impl<T: Real> RunSetup<T> {
    /// A run over `[0, t1]` with mass-only recording and no snapshots.
    pub fn new(scheme: SchemeId, t1: T, dt: T) -> Self {
        Self::over(scheme, T::zero(), t1, dt)
    }

    /// A run over `[t0, t1]`.
    pub fn over(scheme: SchemeId, t0: T, t1: T, dt: T) -> Self {
        Self {
            scheme,
            t0,
            t1,
            dt,
            recording: RecordingLevel::MassOnly,
            snapshots: SnapshotSchedule::None,
            guard: BlowupGuard::default(),
            allow_fast_path: true,
        }
    }

    pub fn with_recording(mut self, recording: RecordingLevel) -> Self {
        self.recording = recording;
        self
    }

    pub fn with_snapshots(mut self, snapshots: SnapshotSchedule<T>) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn with_guard(mut self, guard: BlowupGuard<T>) -> Self {
        self.guard = guard;
        self
    }

    pub fn without_fast_path(mut self) -> Self {
        self.allow_fast_path = false;
        self
    }

    /// Number of steps covering `[t0, t1]`, requiring the span to be an
    /// integer multiple of `dt` up to a `1e-9` relative tolerance.
    pub fn step_count(&self) -> Result<usize> {
        let dt = self.dt;
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(Error::BadTimeStep(dt.as_f64()));
        }
        let span = self.t1 - self.t0;
        if !(span.is_finite() && span > T::zero()) {
            return Err(Error::BadPropagationTime(span.as_f64()));
        }
        let ratio = (span / dt).as_f64();
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::SpanNotCommensurate {
                t0: self.t0.as_f64(),
                t1: self.t1.as_f64(),
                dt: dt.as_f64(),
            });
        }
        Ok(steps as usize)
    }

    fn time_at(&self, j: usize) -> T {
        self.t0 + T::from_f64_lit(j as f64) * self.dt
    }
}

/// Run one path, drawing increments from a fresh stream identified by
/// `(seed, path_index)`.  A missing or empty covariance makes the run
/// deterministic.
pub fn run_path<T: Real>(
    params: &ModelParams<T>,
    cov: Option<&CovarianceSpec<T>>,
    setup: &RunSetup<T>,
    u0: &SpectralField<T>,
    seed: u64,
    path_index: u64,
) -> Result<Trajectory<T>> {
    let source = match cov {
        Some(c) if c.mode_count() > 0 => {
            NoiseSource::Stream(NoiseStream::new(c.clone(), seed, path_index))
        }
        _ => NoiseSource::None,
    };
    run_path_with_source(params, cov, setup, u0, source, path_index)
}

/// Run one path with a caller-supplied increment source.
pub fn run_path_with_source<T: Real>(
    params: &ModelParams<T>,
    cov: Option<&CovarianceSpec<T>>,
    setup: &RunSetup<T>,
    u0: &SpectralField<T>,
    mut source: NoiseSource<'_, T>,
    path_index: u64,
) -> Result<Trajectory<T>> {
    let steps = setup.step_count()?;
    let grid = *params.grid();
    let mode_count = cov.map_or(0, |c| c.mode_count());
    if let NoiseSource::Frozen { path, .. } = &source {
        if path.mode_count() != mode_count {
            return Err(Error::BadCovariance(format!(
                "frozen path carries {} modes, covariance has {}",
                path.mode_count(),
                mode_count
            )));
        }
    }

    let snapshot_indices = setup.snapshots.resolve(setup.t0, setup.dt, steps)?;
    let mut recorder = Recorder::new(
        grid,
        setup,
        path_index,
        params.gamma(),
        cov,
        steps,
        mode_count,
    );
    let mut inc = WienerIncrement::zeros(mode_count, setup.dt);
    let mut proj_buf = vec![T::zero(); mode_count];

    let use_fast = setup.allow_fast_path && FastStepper::eligible(params, setup.recording);
    if use_fast {
        let fast = FastStepper::new(params, cov, setup.dt)?;
        let mut state = fast.prepare(u0)?;
        let mass0 = fast.mass(&state);
        let mut armed = setup.guard.arm(mass0);
        recorder.push_sample(setup.t0, mass0);
        if snapshot_indices.contains(&0) {
            recorder.snapshot(setup.t0, fast.to_physical(&state));
        }
        if let Some(term) = trip(armed.check(setup.t0, mass0), armed.sustained())? {
            return Ok(recorder.finish(fast.to_physical(&state), term));
        }
        for j in 0..steps {
            source.next_increment(setup.dt, &mut inc)?;
            recorder.push_step_inputs(&inc.coeffs, None);
            let rec = fast.step(setup.scheme, &mut state, &inc)?;
            let t_next = setup.time_at(j + 1);
            recorder.push_sample(t_next, rec.mass_after);
            recorder.push_step_record(&rec);
            if snapshot_indices.contains(&(j + 1)) {
                recorder.snapshot(t_next, fast.to_physical(&state));
            }
            if let Some(term) = trip(armed.check(t_next, rec.mass_after), armed.sustained())? {
                return Ok(recorder.finish(fast.to_physical(&state), term));
            }
        }
        return Ok(recorder.finish(fast.to_physical(&state), Termination::Completed));
    }

    let mut stepper = Stepper::new(params, cov, setup.dt)?;
    let mut u = u0.clone();
    stepper.dealias_in_place(&mut u)?;
    let mass0 = u.l2_norm_sq();
    let mut armed = setup.guard.arm(mass0);
    recorder.push_sample(setup.t0, mass0);
    if snapshot_indices.contains(&0) {
        recorder.snapshot(setup.t0, u.clone());
    }
    if let Some(term) = trip(armed.check(setup.t0, mass0), armed.sustained())? {
        return Ok(recorder.finish(u, term));
    }
    let record_modes = setup.recording.wants_modes() && mode_count > 0;
    for j in 0..steps {
        let t_j = setup.time_at(j);
        source.next_increment(setup.dt, &mut inc)?;
        if record_modes {
            stepper.mode_projections_into(&u, &mut proj_buf);
            recorder.push_step_inputs(&inc.coeffs, Some(&proj_buf));
        } else {
            recorder.push_step_inputs(&inc.coeffs, None);
        }
        let rec = stepper.step(setup.scheme, &mut u, t_j, &inc)?;
        let t_next = setup.time_at(j + 1);
        recorder.push_sample(t_next, rec.mass_after);
        recorder.push_step_record(&rec);
        if snapshot_indices.contains(&(j + 1)) {
            recorder.snapshot(t_next, u.clone());
        }
        if let Some(term) = trip(armed.check(t_next, rec.mass_after), armed.sustained())? {
            return Ok(recorder.finish(u, term));
        }
    }
    Ok(recorder.finish(u, Termination::Completed))
}

/// Convert a guard trip into a termination record, passing other errors
/// through.
fn trip(check: Result<()>, sustained: bool) -> Result<Option<Termination>> {
    match check {
        Ok(()) => Ok(None),
        Err(Error::BlowupDetected {
            t_estimate,
            mass,
            threshold,
            consecutive_growth_steps,
        }) => Ok(Some(Termination::Blowup {
            t_estimate,
            mass,
            threshold,
            consecutive_growth_steps,
            sustained,
        })),
        Err(e) => Err(e),
    }
}

/// Accumulates per-sample and per-step series and assembles the final
/// [`Trajectory`].
struct Recorder<T: Real> {
    grid: Grid<T>,
    scheme: SchemeId,
    path_index: u64,
    dt: T,
    gamma: T,
    recording: RecordingLevel,
    times: Vec<T>,
    masses: Vec<T>,
    im_u_dw: Option<Vec<T>>,
    im_u_f: Option<Vec<T>>,
    noise_coeffs: Option<Vec<T>>,
    mode_projections: Option<Vec<T>>,
    noise_amplitudes: Vec<T>,
    hs_norm_sq: T,
    snapshots: Vec<(T, SpectralField<T>)>,
}

impl<T: Real> Recorder<T> {
    fn new(
        grid: Grid<T>,
        setup: &RunSetup<T>,
        path_index: u64,
        gamma: T,
        cov: Option<&CovarianceSpec<T>>,
        steps: usize,
        mode_count: usize,
    ) -> Self {
        let ledger = setup.recording.wants_ledger();
        Self {
            grid,
            scheme: setup.scheme,
            path_index,
            dt: setup.dt,
            gamma,
            recording: setup.recording,
            times: Vec::with_capacity(steps + 1),
            masses: Vec::with_capacity(steps + 1),
            im_u_dw: ledger.then(|| Vec::with_capacity(steps)),
            im_u_f: ledger.then(|| Vec::with_capacity(steps)),
            noise_coeffs: ledger.then(|| Vec::with_capacity(steps * mode_count)),
            mode_projections: setup
                .recording
                .wants_modes()
                .then(|| Vec::with_capacity(steps * mode_count)),
            noise_amplitudes: cov.map_or_else(Vec::new, |c| c.amplitudes().to_vec()),
            hs_norm_sq: cov.map_or_else(T::zero, |c| c.hs_norm_sq()),
            snapshots: Vec::new(),
        }
    }

    fn push_sample(&mut self, t: T, mass: T) {
        self.times.push(t);
        self.masses.push(mass);
    }

    /// Record the left-endpoint step inputs: the increment coefficients
    /// and, when requested, the pre-step mode projections.
    fn push_step_inputs(&mut self, coeffs: &[T], projections: Option<&[T]>) {
        if let Some(log) = &mut self.noise_coeffs {
            log.extend_from_slice(coeffs);
        }
        if let (Some(log), Some(p)) = (&mut self.mode_projections, projections) {
            log.extend_from_slice(p);
        }
    }

    fn push_step_record(&mut self, rec: &StepRecord<T>) {
        if let Some(log) = &mut self.im_u_dw {
            log.push(rec.im_u_dw);
        }
        if let Some(log) = &mut self.im_u_f {
            log.push(rec.im_u_f);
        }
    }

    fn snapshot(&mut self, t: T, state: SpectralField<T>) {
        self.snapshots.push((t, state));
    }

    fn finish(self, final_state: SpectralField<T>, termination: Termination) -> Trajectory<T> {
        Trajectory {
            grid: self.grid,
            scheme: self.scheme,
            path_index: self.path_index,
            dt: self.dt,
            gamma: self.gamma,
            recording: self.recording,
            times: self.times,
            masses: self.masses,
            im_u_dw: self.im_u_dw,
            im_u_f: self.im_u_f,
            noise_coeffs: self.noise_coeffs,
            mode_projections: self.mode_projections,
            noise_amplitudes: self.noise_amplitudes,
            hs_norm_sq: self.hs_norm_sq,
            snapshots: self.snapshots,
            final_state,
            termination,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ForcingSpec;
    use crate::noise::BrownianPath;
    use crate::scalar::Cplx;

    fn grid() -> Grid<f64> {
        Grid::new(2, 16, std::f64::consts::TAU).unwrap()
    }

    fn initial(g: Grid<f64>) -> SpectralField<f64> {
        SpectralField::from_fn_physical(g, |x| {
            Cplx::new(x[0].cos() + 0.3 * x[1].sin(), 0.5 * (x[0] - x[1]).cos())
        })
    }

    fn linear_params(g: Grid<f64>, gamma: f64) -> ModelParams<f64> {
        ModelParams::new(0.75, 0.0, gamma, ForcingSpec::zero(g)).unwrap()
    }

    #[test]
    fn deterministic_linear_decay_matches_the_closed_form() {
        let g = grid();
        let gamma = 0.7;
        let params = linear_params(g, gamma);
        let setup = RunSetup::new(SchemeId::ExpEuler, 1.0, 1e-2);
        let traj = run_path(&params, None, &setup, &initial(g), 1, 0).unwrap();
        assert_eq!(traj.times().len(), 101);
        assert!(traj.completed());
        let m0 = traj.masses()[0];
        for (t, m) in traj.times().iter().zip(traj.masses()) {
            let expect = m0 * (-2.0 * gamma * t).exp();
            assert!((m - expect).abs() < 1e-10 * m0, "t={t}: {m} vs {expect}");
        }
    }

    #[test]
    fn fast_and_generic_routes_agree() {
        let g = grid();
        let params = linear_params(g, 0.5);
        let cov = CovarianceSpec::builtin(g, 0.4, 3.0, 9).unwrap();
        let setup =
            RunSetup::new(SchemeId::Strang, 0.5, 5e-3).with_recording(RecordingLevel::Ledger);
        let fast = run_path(&params, Some(&cov), &setup, &initial(g), 42, 3).unwrap();
        let slow_setup = setup.clone().without_fast_path();
        let slow = run_path(&params, Some(&cov), &slow_setup, &initial(g), 42, 3).unwrap();

        for (a, b) in fast.masses().iter().zip(slow.masses()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
        }
        for (a, b) in fast.im_u_dw().unwrap().iter().zip(slow.im_u_dw().unwrap()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(fast.noise_coeffs().unwrap(), slow.noise_coeffs().unwrap());
        for (a, b) in fast
            .final_state()
            .values()
            .iter()
            .zip(slow.final_state().values())
        {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn frozen_path_at_the_fine_step_reproduces_the_stream() {
        let g = grid();
        let params = linear_params(g, 0.5);
        let cov = CovarianceSpec::builtin(g, 0.4, 3.0, 9).unwrap();
        let dt = 5e-3;
        let steps = 50;
        let setup = RunSetup::new(SchemeId::ExpEuler, dt * steps as f64, dt)
            .with_recording(RecordingLevel::Ledger);

        let streamed = run_path(&params, Some(&cov), &setup, &initial(g), 9, 4).unwrap();
        let path = BrownianPath::generate(&cov, 9, 4, dt, steps).unwrap();
        let source = NoiseSource::frozen(&path, 1).unwrap();
        let frozen =
            run_path_with_source(&params, Some(&cov), &setup, &initial(g), source, 4).unwrap();

        assert_eq!(streamed.masses(), frozen.masses());
        assert_eq!(
            streamed.noise_coeffs().unwrap(),
            frozen.noise_coeffs().unwrap()
        );
    }

    #[test]
    fn snapshots_are_captured_at_scheduled_indices() {
        let g = grid();
        let params = linear_params(g, 1.0);
        let setup = RunSetup::new(SchemeId::ExpEuler, 0.1, 1e-2)
            .with_snapshots(SnapshotSchedule::EveryKSteps(5));
        let traj = run_path(&params, None, &setup, &initial(g), 0, 0).unwrap();
        let times: Vec<f64> = traj.snapshots().iter().map(|(t, _)| *t).collect();
        assert_eq!(times.len(), 3);
        assert!((times[0] - 0.0).abs() < 1e-15);
        assert!((times[1] - 0.05).abs() < 1e-12);
        assert!((times[2] - 0.1).abs() < 1e-12);
        let (_, last) = &traj.snapshots()[2];
        for (a, b) in last.values().iter().zip(traj.final_state().values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn guard_trip_truncates_and_reports_blowup() {
        let g = grid();
        // Phase forcing with a positive coefficient pumps mass at rate
        // exp(2 c t) when gamma = 0.
        let forcing = ForcingSpec::linear_phase(g, |_| 0.5, 0.5).unwrap();
        let params = ModelParams::new(0.75, 0.0, 0.0, forcing).unwrap();
        let setup = RunSetup::new(SchemeId::ExpEuler, 3.0, 1e-2).with_guard(BlowupGuard {
            mass_threshold: Some(2.0 * initial(g).l2_norm_sq()),
            consecutive_growth_limit: 10,
        });
        let traj = run_path(&params, None, &setup, &initial(g), 0, 0).unwrap();
        assert!(!traj.completed());
        match traj.termination() {
            Termination::Blowup {
                t_estimate,
                sustained,
                ..
            } => {
                // Mass doubles near t = ln(2) / (2 c) = ln(2).
                assert!((t_estimate - std::f64::consts::LN_2).abs() < 0.05);
                assert!(sustained);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
        assert!(traj.steps_completed() < 300);
        assert_eq!(traj.masses().len(), traj.steps_completed() + 1);
        assert!(traj.ensure_completed().is_err());
        let final_mass = traj.final_state().l2_norm_sq();
        let last = *traj.masses().last().unwrap();
        assert!((final_mass - last).abs() < 1e-10 * last);
    }

    #[test]
    fn immediate_trip_packages_a_single_sample() {
        let g = grid();
        let params = linear_params(g, 1.0);
        let setup = RunSetup::new(SchemeId::ExpEuler, 1.0, 1e-2).with_guard(BlowupGuard {
            mass_threshold: Some(1e-12),
            consecutive_growth_limit: 3,
        });
        let traj = run_path(&params, None, &setup, &initial(g), 0, 0).unwrap();
        assert_eq!(traj.times().len(), 1);
        assert_eq!(traj.steps_completed(), 0);
        assert!(!traj.completed());
    }

    #[test]
    fn rejects_bad_spans_and_steps() {
        let g = grid();
        let params = linear_params(g, 1.0);
        let u0 = initial(g);
        let bad = RunSetup::new(SchemeId::ExpEuler, 1.0, 0.3);
        assert!(matches!(
            run_path(&params, None, &bad, &u0, 0, 0),
            Err(Error::SpanNotCommensurate { .. })
        ));
        let backwards = RunSetup::over(SchemeId::ExpEuler, 1.0, 0.5, 1e-2);
        assert!(matches!(
            run_path(&params, None, &backwards, &u0, 0, 0),
            Err(Error::BadPropagationTime(_))
        ));
        let zero_dt = RunSetup::new(SchemeId::ExpEuler, 1.0, 0.0);
        assert!(matches!(
            run_path(&params, None, &zero_dt, &u0, 0, 0),
            Err(Error::BadTimeStep(_))
        ));
    }

    #[test]
    fn recording_levels_gate_the_ledger_series() {
        let g = grid();
        let params = ModelParams::new(0.75, 1.0, 1.0, ForcingSpec::zero(g)).unwrap();
        let cov = CovarianceSpec::builtin(g, 0.3, 3.0, 5).unwrap();
        let steps = 20;
        let base = RunSetup::new(SchemeId::ExpEuler, 0.1, 5e-3);

        let bare = run_path(&params, Some(&cov), &base, &initial(g), 5, 0).unwrap();
        assert!(bare.im_u_dw().is_none());
        assert!(bare.ledger_series().is_err());

        let full = base.with_recording(RecordingLevel::LedgerWithModes);
        let traj = run_path(&params, Some(&cov), &full, &initial(g), 5, 0).unwrap();
        let (dw, f, coeffs) = traj.ledger_series().unwrap();
        assert_eq!(dw.len(), steps);
        assert_eq!(f.len(), steps);
        assert_eq!(coeffs.len(), steps * cov.mode_count());
        let proj = traj.mode_projections().unwrap();
        assert_eq!(proj.len(), steps * cov.mode_count());

        // First-step projections are taken against the dealiased initial
        // state, before any update.
        let mut stepper = Stepper::new(&params, Some(&cov), 5e-3).unwrap();
        let mut u = initial(g);
        stepper.dealias_in_place(&mut u).unwrap();
        for k in 0..cov.mode_count() {
            let direct = cov.im_pair_mode(u.values(), k);
            assert!((proj[k] - direct).abs() < 1e-13, "mode {k}");
        }
        assert_eq!(traj.mode_count(), cov.mode_count());
        assert!((traj.hs_norm_sq() - cov.hs_norm_sq()).abs() < 1e-15);
    }
}
