//! Pathwise and in-expectation mass balance.
//!
//! For the mass `M = ||u||^2` the stochastic balance over one step reads
//!
//! ```text
//! dM = (-2 gamma M - 2 Im<u, f> + tr) dt - 2 Im<u, dW>
//! ```
//!
//! with `tr` the squared Hilbert-Schmidt norm of the noise operator and
//! `<., .>` the discrete inner product (conjugation on the second slot).
//! Applying the chain rule to `M^m` adds a drift weight `m M^(m-1)` and a
//! quadratic-variation term `2 m (m-1) M^(m-2) sum_k amp_k^2 Im<u, e_k>^2`.
//! Every integral is discretized with left-point quadrature using the
//! trajectory's own recorded increments, so the residual measures nothing
//! but the scheme's own drift.

use crate::dynamics::{nonlinearity, ModelParams};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::scalar::Real;
use crate::spectral::{Compensated, SpectralField};

use super::ensemble::{mass_moment_stats, SeriesStats};

/// Cumulative ledger of every term in the order-`m` mass balance.
///
/// All series run over sample times (`steps + 1` entries, first entry
/// zero for the cumulative terms).  `residuals[j]` is the mass-power
/// change minus the sum of all ledger terms up to time `j`.
#[derive(Debug, Clone)]
pub struct MassLedger<T> {
    pub order: usize,
    pub times: Vec<T>,
    pub mass_power: Vec<T>,
    pub damping: Vec<T>,
    pub forcing: Vec<T>,
    pub martingale: Vec<T>,
    pub ito_correction: Vec<T>,
    pub quadratic_variation: Vec<T>,
    pub residuals: Vec<T>,
}

impl<T: Real> MassLedger<T> {
    pub fn max_abs_residual(&self) -> T {
        self.residuals
            .iter()
            .fold(T::zero(), |acc, r| acc.max(r.abs()))
    }

    /// `max |residual| / max(1, M_0^m)` — the headline closure figure.
    pub fn max_relative_residual(&self) -> T {
        self.max_abs_residual() / T::one().max(self.mass_power[0])
    }
}

/// Integer power with the convention `x^0 = 1` (also at `x = 0`).
fn int_pow<T: Real>(x: T, k: usize) -> T {
    let mut acc = T::one();
    for _ in 0..k {
        acc = acc * x;
    }
    acc
}

/// Evaluate the order-`m` mass balance along one trajectory.
///
/// Requires ledger recording; orders `m >= 2` with active noise
/// additionally require per-mode projections
/// ([`RecordingLevel::LedgerWithModes`](crate::integrator::RecordingLevel)).
pub fn ito_mass_residual<T: Real>(traj: &Trajectory<T>, m: usize) -> Result<MassLedger<T>> {
    if m == 0 {
        return Err(Error::BadMomentOrder(0));
    }
    let (im_u_dw, im_u_f, _) = traj.ledger_series()?;
    let steps = traj.steps_completed();
    let mode_count = traj.mode_count();
    let needs_quadratic = m >= 2 && mode_count > 0 && traj.hs_norm_sq() > T::zero();
    let projections = if needs_quadratic {
        Some(
            traj.mode_projections()
                .ok_or(Error::ModeProjectionsMissing)?,
        )
    } else {
        None
    };

    let dt = traj.dt();
    let gamma = traj.gamma();
    let tr = traj.hs_norm_sq();
    let amps = traj.noise_amplitudes();
    let masses = traj.masses();
    let mf = T::from_f64_lit(m as f64);
    let two = T::from_f64_lit(2.0);

    let mut ledger = MassLedger {
        order: m,
        times: traj.times().to_vec(),
        mass_power: masses.iter().map(|&x| int_pow(x, m)).collect(),
        damping: Vec::with_capacity(steps + 1),
        forcing: Vec::with_capacity(steps + 1),
        martingale: Vec::with_capacity(steps + 1),
        ito_correction: Vec::with_capacity(steps + 1),
        quadratic_variation: Vec::with_capacity(steps + 1),
        residuals: Vec::with_capacity(steps + 1),
    };
    for series in [
        &mut ledger.damping,
        &mut ledger.forcing,
        &mut ledger.martingale,
        &mut ledger.ito_correction,
        &mut ledger.quadratic_variation,
        &mut ledger.residuals,
    ] {
        series.push(T::zero());
    }

    let mut damping = Compensated::new();
    let mut forcing = Compensated::new();
    let mut martingale = Compensated::new();
    let mut ito = Compensated::new();
    let mut quad = Compensated::new();
    for i in 0..steps {
        let mass = masses[i];
        let w1 = mf * int_pow(mass, m - 1);
        damping.add(-two * gamma * mass * w1 * dt);
        forcing.add(-two * im_u_f[i] * w1 * dt);
        martingale.add(-two * im_u_dw[i] * w1);
        ito.add(tr * w1 * dt);
        if let Some(proj) = projections {
            let row = &proj[i * mode_count..(i + 1) * mode_count];
            let mut qv = Compensated::new();
            for (a, p) in amps.iter().zip(row) {
                qv.add(*a * *a * *p * *p);
            }
            let w2 = two * mf * (mf - T::one()) * int_pow(mass, m - 2);
            quad.add(w2 * qv.value() * dt);
        }
        let d = damping.clone().value();
        let f = forcing.clone().value();
        let mg = martingale.clone().value();
        let it = ito.clone().value();
        let qv = quad.clone().value();
        ledger.damping.push(d);
        ledger.forcing.push(f);
        ledger.martingale.push(mg);
        ledger.ito_correction.push(it);
        ledger.quadratic_variation.push(qv);
        let change = ledger.mass_power[i + 1] - ledger.mass_power[0];
        ledger.residuals.push(change - (d + f + mg + it + qv));
    }
    Ok(ledger)
}

/// The mass-balance rate the nonlinear term would contribute if it were
/// not gauge invariant: `2 Im<N(u), u>` with `N(u) = |u|^(2 sigma) u`.
///
/// Analytically zero; numerically bounded by roundoff.  Feeding this into
/// a ledger multiplied by `dt` quantifies the (absent) effect of the
/// nonlinearity on the mass.
pub fn nonlinear_mass_contribution<T: Real>(u: &SpectralField<T>, sigma: T) -> Result<T> {
    let n = nonlinearity(u, sigma)?;
    Ok(T::from_f64_lit(2.0) * n.im_inner(u)?)
}

/// Closed-form mean mass of the linear model (`sigma = 0`, `f = 0`):
/// exponential relaxation from `m0` toward the plateau `tr / (2 gamma)`.
pub fn expected_mass_reference<T: Real>(gamma: T, tr: T, m0: T, t: T) -> T {
    let two = T::from_f64_lit(2.0);
    if gamma > T::zero() {
        let decay = (-two * gamma * t).exp();
        decay * m0 + tr / (two * gamma) * (T::one() - decay)
    } else {
        m0 + tr * t
    }
}

/// Which form of the in-expectation mass law a report verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassLawKind {
    /// Linear model: ensemble mean mass against the closed form.
    ClosedForm,
    /// General model: ensemble mean of the martingale-free ledger
    /// residual against zero.
    LedgerResidual,
}

/// Outcome of [`expected_mass_check`].
#[derive(Debug, Clone)]
pub struct ExpectedMassReport<T> {
    pub kind: MassLawKind,
    pub paths: usize,
    pub times: Vec<T>,
    /// Mean mass (closed form) or mean ledger residual (general case).
    pub observed: Vec<T>,
    pub reference: Vec<T>,
    pub std_error: Vec<T>,
    /// `tr / (2 gamma)` when the damping is positive.
    pub stationary_level: Option<T>,
    pub max_abs_gap: T,
    /// Worst `|observed - reference|` over the acceptance band
    /// (three standard errors plus a roundoff allowance); `<= 1` passes.
    pub worst_gap_over_band: T,
    pub passed: bool,
}

/// Verify the in-expectation mass law over an ensemble.
///
/// For the linear model the ensemble mean is compared to the closed form
/// at every recorded time.  Otherwise each path's martingale-free ledger
/// residual is averaged; its mean must vanish within the band.  Requires
/// at least 100 paths for the bands to be meaningful.
pub fn expected_mass_check<T: Real>(
    trajs: &[Trajectory<T>],
    params: &ModelParams<T>,
) -> Result<ExpectedMassReport<T>> {
    if trajs.len() < 100 {
        return Err(Error::BadEnsemble(format!(
            "expected-mass check needs >= 100 paths, got {}",
            trajs.len()
        )));
    }
    let gamma = params.gamma();
    let tr = trajs[0].hs_norm_sq();
    let two = T::from_f64_lit(2.0);
    let closed_form = params.sigma() == T::zero() && params.forcing().is_zero();

    let (kind, stats, reference) = if closed_form {
        let stats = mass_moment_stats(trajs, 1)?;
        let m0 = stats.mean[0];
        let reference: Vec<T> = stats
            .times
            .iter()
            .map(|&t| expected_mass_reference(gamma, tr, m0, t - stats.times[0]))
            .collect();
        (MassLawKind::ClosedForm, stats, reference)
    } else {
        let rows: Vec<Vec<T>> = trajs
            .iter()
            .map(|t| martingale_free_residual(t))
            .collect::<Result<_>>()?;
        let times = trajs[0].times().to_vec();
        let stats = SeriesStats::from_rows(times, &rows)?;
        let reference = vec![T::zero(); stats.mean.len()];
        (MassLawKind::LedgerResidual, stats, reference)
    };

    let scale = T::one() + trajs[0].masses()[0].abs();
    let eps = T::from_f64_lit(1e-12) * scale;
    let mut max_abs_gap = T::zero();
    let mut worst = T::zero();
    for j in 0..stats.mean.len() {
        let gap = (stats.mean[j] - reference[j]).abs();
        let band = T::from_f64_lit(3.0) * stats.std_error[j] + eps;
        max_abs_gap = max_abs_gap.max(gap);
        worst = worst.max(gap / band);
    }
    Ok(ExpectedMassReport {
        kind,
        paths: trajs.len(),
        times: stats.times,
        observed: stats.mean,
        reference,
        std_error: stats.std_error,
        stationary_level: (gamma > T::zero()).then(|| tr / (two * gamma)),
        max_abs_gap,
        worst_gap_over_band: worst,
        passed: worst <= T::one(),
    })
}

/// Per-path series `M_j - M_0 - sum_i (-2 gamma M_i - 2 Im<u_i, f_i> + tr) dt`.
///
/// In expectation this is the (mean-zero) martingale plus the scheme's
/// drift, so its ensemble mean must sit inside the confidence band.
fn martingale_free_residual<T: Real>(traj: &Trajectory<T>) -> Result<Vec<T>> {
    let (_, im_u_f, _) = traj.ledger_series()?;
    let masses = traj.masses();
    let dt = traj.dt();
    let gamma = traj.gamma();
    let tr = traj.hs_norm_sq();
    let two = T::from_f64_lit(2.0);
    let mut out = Vec::with_capacity(masses.len());
    out.push(T::zero());
    let mut drift = Compensated::new();
    for i in 0..traj.steps_completed() {
        drift.add((-two * gamma * masses[i] - two * im_u_f[i] + tr) * dt);
        out.push(masses[i + 1] - masses[0] - drift.clone().value());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ForcingSpec;
    use crate::integrator::{run_path, RecordingLevel, RunSetup, SchemeId, SnapshotSchedule};
    use crate::noise::CovarianceSpec;
    use crate::scalar::Cplx;
    use crate::spectral::{Grid, SpaceTag};

    use super::super::ensemble::run_ensemble;

    fn grid() -> Grid<f64> {
        Grid::new(2, 16, std::f64::consts::TAU).unwrap()
    }

    fn narrow_band_state(g: Grid<f64>) -> SpectralField<f64> {
        SpectralField::from_fn_physical(g, |x| {
            Cplx::new(0.6 * x[0].cos() + 0.4 * x[1].sin(), 0.3 * x[1].cos())
        })
    }

    #[test]
    fn conservative_strang_run_has_tiny_ledger_residual() {
        // gamma = 0, no noise, no forcing: every ledger term vanishes and
        // the residual is exactly the scheme's mass drift.
        let g = grid();
        let params = ModelParams::new(0.75, 1.0, 0.0, ForcingSpec::zero(g)).unwrap();
        let setup =
            RunSetup::new(SchemeId::Strang, 0.3, 1e-3).with_recording(RecordingLevel::Ledger);
        let traj = run_path(&params, None, &setup, &narrow_band_state(g), 0, 0).unwrap();
        let ledger = ito_mass_residual(&traj, 1).unwrap();
        assert_eq!(*ledger.damping.last().unwrap(), 0.0);
        assert_eq!(*ledger.martingale.last().unwrap(), 0.0);
        assert!(ledger.max_relative_residual() <= 1e-10);
    }

    #[test]
    fn residual_shrinks_under_coupled_refinement() {
        use crate::noise::{BrownianPath, NoiseSource};
        let g = grid();
        let forcing = ForcingSpec::linear_phase(g, |x| 0.025 * (1.0 + x[0].cos()), 0.05).unwrap();
        let params = ModelParams::new(0.75, 1.0, 1.0, forcing).unwrap();
        let cov = CovarianceSpec::builtin(g, 0.3, 3.0, 5).unwrap();
        let dt_fine = 2.5e-3;
        let fine_steps = 128;
        let path = BrownianPath::generate(&cov, 21, 0, dt_fine, fine_steps).unwrap();
        let t1 = dt_fine * fine_steps as f64;
        let mut maxes = Vec::new();
        for stride in [4usize, 2, 1] {
            let dt = dt_fine * stride as f64;
            let setup =
                RunSetup::new(SchemeId::ExpEuler, t1, dt).with_recording(RecordingLevel::Ledger);
            let source = NoiseSource::frozen(&path, stride).unwrap();
            let traj = run_path_with_source(
                &params,
                Some(&cov),
                &setup,
                &narrow_band_state(g),
                source,
                0,
            )
            .unwrap();
            maxes.push(ito_mass_residual(&traj, 1).unwrap().max_relative_residual());
        }
        assert!(
            maxes[0] > maxes[1] && maxes[1] > maxes[2],
            "residuals not decreasing: {maxes:?}"
        );
    }

    use crate::integrator::run_path_with_source;

    #[test]
    fn quadratic_variation_term_matches_direct_recomputation() {
        let g = Grid::new(1, 16, std::f64::consts::TAU).unwrap();
        let params = ModelParams::new(0.75, 1.0, 1.0, ForcingSpec::zero(g)).unwrap();
        let cov = CovarianceSpec::builtin(g, 0.5, 2.0, 3).unwrap();
        let dt = 1e-2;
        let steps = 20;
        let setup = RunSetup::new(SchemeId::ExpEuler, dt * steps as f64, dt)
            .with_recording(RecordingLevel::LedgerWithModes)
            .with_snapshots(SnapshotSchedule::EveryKSteps(1));
        let u0 = SpectralField::from_fn_physical(g, |x| Cplx::new(x[0].cos(), 0.2 * x[0].sin()));
        let traj = run_path(&params, Some(&cov), &setup, &u0, 3, 0).unwrap();
        let ledger = ito_mass_residual(&traj, 2).unwrap();

        // Recompute the projections from the stored left-endpoint states
        // by pairing with physically synthesized basis rows.
        let amps = traj.noise_amplitudes();
        let mut direct = 0.0;
        let m = 2.0;
        for i in 0..steps {
            let (_, u) = &traj.snapshots()[i];
            let mut qv = 0.0;
            for k in 0..cov.mode_count() {
                let row: Vec<Cplx<f64>> = cov
                    .basis_row(k)
                    .iter()
                    .map(|&r| Cplx::new(r, 0.0))
                    .collect();
                let e_k = SpectralField::from_values(g, SpaceTag::Physical, row).unwrap();
                let p = u.im_inner(&e_k).unwrap();
                qv += amps[k] * amps[k] * p * p;
            }
            direct += 2.0 * m * (m - 1.0) * traj.masses()[i].powi(0) * qv * dt;
            let ledger_val = ledger.quadratic_variation[i + 1];
            assert!(
                (ledger_val - direct).abs() <= 1e-12 * (1.0 + direct.abs()),
                "step {i}: {ledger_val} vs {direct}"
            );
        }
    }

    #[test]
    fn order_two_without_projections_is_refused() {
        let g = grid();
        let params = ModelParams::new(0.75, 0.0, 1.0, ForcingSpec::zero(g)).unwrap();
        let cov = CovarianceSpec::builtin(g, 0.3, 3.0, 5).unwrap();
        let setup =
            RunSetup::new(SchemeId::ExpEuler, 0.05, 1e-2).with_recording(RecordingLevel::Ledger);
        let traj = run_path(&params, Some(&cov), &setup, &narrow_band_state(g), 0, 0).unwrap();
        assert!(ito_mass_residual(&traj, 1).is_ok());
        assert!(matches!(
            ito_mass_residual(&traj, 2),
            Err(Error::ModeProjectionsMissing)
        ));
        assert!(matches!(
            ito_mass_residual(&traj, 0),
            Err(Error::BadMomentOrder(0))
        ));
    }

    #[test]
    fn nonlinear_term_never_moves_mass() {
        let g = grid();
        let u = SpectralField::from_fn_physical(g, |x| {
            Cplx::new(
                (x[0] * 2.0).cos() + 0.3 * x[1].sin(),
                (x[0] + 0.5 * x[1]).sin(),
            )
        });
        let c = nonlinear_mass_contribution(&u, 1.0).unwrap();
        assert!(c.abs() <= 1e-12, "contribution {c}");
    }

    #[test]
    fn linear_ensemble_matches_the_closed_form() {
        let g = Grid::new(1, 32, std::f64::consts::TAU).unwrap();
        let params = ModelParams::new(0.75, 0.0, 1.0, ForcingSpec::zero(g)).unwrap();
        let cov = CovarianceSpec::builtin(g, 0.5, 2.0, 7).unwrap();
        let u0 = SpectralField::from_fn_physical(g, |x| Cplx::new(x[0].cos(), 0.0));
        let setup = RunSetup::new(SchemeId::ExpEuler, 1.0, 5e-3);
        let trajs = run_ensemble(&params, Some(&cov), &setup, &u0, 7, 150).unwrap();
        let report = expected_mass_check(&trajs, &params).unwrap();
        assert_eq!(report.kind, MassLawKind::ClosedForm);
        assert!(report.passed, "worst {}", report.worst_gap_over_band);
        let level = report.stationary_level.unwrap();
        assert!((level - cov.hs_norm_sq() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn nonlinear_ensemble_uses_the_ledger_form() {
        let g = Grid::new(1, 16, std::f64::consts::TAU).unwrap();
        let params = ModelParams::new(0.75, 1.0, 1.0, ForcingSpec::zero(g)).unwrap();
        let cov = CovarianceSpec::builtin(g, 0.3, 2.0, 5).unwrap();
        let u0 = SpectralField::from_fn_physical(g, |x| Cplx::new(0.5 * x[0].cos(), 0.0));
        let setup =
            RunSetup::new(SchemeId::Strang, 0.2, 2e-3).with_recording(RecordingLevel::Ledger);
        let trajs = run_ensemble(&params, Some(&cov), &setup, &u0, 13, 120).unwrap();
        let report = expected_mass_check(&trajs, &params).unwrap();
        assert_eq!(report.kind, MassLawKind::LedgerResidual);
        assert!(report.passed, "worst {}", report.worst_gap_over_band);
    }

    #[test]
    fn small_ensembles_are_refused() {
        let g = grid();
        let params = ModelParams::new(0.75, 0.0, 1.0, ForcingSpec::zero(g)).unwrap();
        let setup = RunSetup::new(SchemeId::ExpEuler, 0.05, 1e-2);
        let trajs = run_ensemble(&params, None, &setup, &narrow_band_state(g), 0, 3).unwrap();
        assert!(matches!(
            expected_mass_check(&trajs, &params),
            Err(Error::BadEnsemble(_))
        ));
    }
}
