//! Absorbing-ball radii and empirical pullback absorption.
//!
//! The dissipativity theory yields, for moment exponent `rho = 2m` and
//! damping margin `gap = gamma - beta`, an absorbing radius
//!
//! ```text
//! R(anchor) = reference_moment
//!           + C1(m) tr^m gap^(-m)
//!           + C2(m) gap^(1-m) * J(anchor)
//! ```
//!
//! where `J(anchor) = integral_0^inf exp(-gap m tau) psi1(anchor - tau)^m dtau`
//! is the exponentially weighted history of the forcing's additive bound.
//! The probe then measures when ensembles started from large data
//! actually enter the ball of radius `R`.

use std::sync::Arc;

use crate::dynamics::ModelParams;
use crate::error::{Error, RegimeConstraint, Result};
use crate::integrator::{BlowupGuard, RunSetup, SchemeId};
use crate::noise::CovarianceSpec;
use crate::scalar::Real;
use crate::spectral::SpectralField;

use super::ensemble::{run_ensemble, SeriesStats};
use super::moments::moment_bound_constants;

/// Temporal profile of the forcing's additive bound `||psi1(s)||_L1`.
///
/// Closed forms are used where the window integral admits one; the
/// general profile falls back to adaptive quadrature with relative
/// tolerance `1e-8`.
#[derive(Clone)]
pub enum Psi1Schedule<T> {
    /// No additive forcing bound.
    Zero,
    /// Autonomous forcing: constant `l1` for all times.
    Constant { l1: T },
    /// `||psi1(s)|| = l1_scale * exp(lambda * s)`; integrable against the
    /// window weight only when `lambda * m + gap * m > 0`.
    Exponential { l1_scale: T, lambda: T },
    /// Constant `l1` on `[s_start, s_end]`, zero outside.
    CompactSupport { l1: T, s_start: T, s_end: T },
    /// Arbitrary profile `s -> ||psi1(s)||_L1`.
    General(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: std::fmt::Debug> std::fmt::Debug for Psi1Schedule<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psi1Schedule::Zero => f.write_str("Zero"),
            Psi1Schedule::Constant { l1 } => f.debug_struct("Constant").field("l1", l1).finish(),
            Psi1Schedule::Exponential { l1_scale, lambda } => f
                .debug_struct("Exponential")
                .field("l1_scale", l1_scale)
                .field("lambda", lambda)
                .finish(),
            Psi1Schedule::CompactSupport { l1, s_start, s_end } => f
                .debug_struct("CompactSupport")
                .field("l1", l1)
                .field("s_start", s_start)
                .field("s_end", s_end)
                .finish(),
            Psi1Schedule::General(_) => f.write_str("General(..)"),
        }
    }
}

impl<T: Real> Psi1Schedule<T> {
    /// `J(anchor) = integral_0^inf exp(-a tau) psi1(anchor - tau)^m dtau`
    /// with `a = gap * m`.
    fn anchored_integral(&self, a: T, anchor: T, m: T) -> Result<T> {
        match self {
            Psi1Schedule::Zero => Ok(T::zero()),
            Psi1Schedule::Constant { l1 } => {
                if *l1 == T::zero() {
                    Ok(T::zero())
                } else {
                    Ok(l1.powf(m) / a)
                }
            }
            Psi1Schedule::Exponential { l1_scale, lambda } => {
                let b = a + *lambda * m;
                if !(b > T::zero()) {
                    return Err(Error::DivergentForcingIntegral(format!(
                        "exponential growth rate {} overwhelms the window weight {}",
                        lambda.as_f64(),
                        a.as_f64()
                    )));
                }
                // integral_0^inf e^(-a tau) (l1 e^(lambda (anchor - tau)))^m dtau
                Ok(l1_scale.powf(m) * (*lambda * m * anchor).exp() / b)
            }
            Psi1Schedule::CompactSupport { l1, s_start, s_end } => {
                if s_end < s_start {
                    return Err(Error::BadForcing(
                        "compact support window has s_end < s_start".into(),
                    ));
                }
                let hi = s_end.min(anchor);
                if !(hi > *s_start) || *l1 == T::zero() {
                    return Ok(T::zero());
                }
                // Work with exponents <= 0 for stability.
                let e_hi = (a * (hi - anchor)).exp();
                let e_lo = (a * (*s_start - anchor)).exp();
                Ok(l1.powf(m) * (e_hi - e_lo) / a)
            }
            Psi1Schedule::General(profile) => {
                let f = |tau: T| profile(anchor - tau).powf(m) * (-a * tau).exp();
                let window = T::one() / a;
                let tol = T::from_f64_lit(1e-8);
                let mut total = T::zero();
                let mut k = 0usize;
                loop {
                    let lo = window * T::from_f64_lit(k as f64);
                    let hi = window * T::from_f64_lit((k + 1) as f64);
                    let piece = adaptive_simpson(&f, lo, hi, tol * (T::one() + total.abs()), 24);
                    total = total + piece;
                    if !total.is_finite() {
                        return Err(Error::DivergentForcingIntegral(
                            "window integral overflowed".into(),
                        ));
                    }
                    k += 1;
                    if k >= 8 && piece.abs() <= tol * (T::one() + total.abs()) {
                        return Ok(total);
                    }
                    if k >= 256 {
                        return Err(Error::DivergentForcingIntegral(format!(
                            "window contributions still {} after {k} decay lengths",
                            piece.as_f64()
                        )));
                    }
                }
            }
        }
    }
}

/// Recursive adaptive Simpson quadrature on `[lo, hi]`.
fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, lo: T, hi: T, tol: T, depth: usize) -> T {
    let two = T::from_f64_lit(2.0);
    let six = T::from_f64_lit(6.0);
    let mid = (lo + hi) / two;
    let h = hi - lo;
    let s = |a: T, b: T, c: T, w: T| w * (a + T::from_f64_lit(4.0) * b + c) / six;
    let fl = f(lo);
    let fm = f(mid);
    let fh = f(hi);
    let whole = s(fl, fm, fh, h);
    fn recurse<T: Real>(
        f: &impl Fn(T) -> T,
        lo: T,
        mid: T,
        hi: T,
        fl: T,
        fm: T,
        fh: T,
        whole: T,
        tol: T,
        depth: usize,
    ) -> T {
        let two = T::from_f64_lit(2.0);
        let six = T::from_f64_lit(6.0);
        let s = |a: T, b: T, c: T, w: T| w * (a + T::from_f64_lit(4.0) * b + c) / six;
        let lmid = (lo + mid) / two;
        let rmid = (mid + hi) / two;
        let flm = f(lmid);
        let frm = f(rmid);
        let left = s(fl, flm, fm, mid - lo);
        let right = s(fm, frm, fh, hi - mid);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= T::from_f64_lit(15.0) * tol {
            left + right + delta / T::from_f64_lit(15.0)
        } else {
            let half_tol = tol / two;
            recurse(f, lo, lmid, mid, fl, flm, fm, left, half_tol, depth - 1)
                + recurse(f, mid, rmid, hi, fm, frm, fh, right, half_tol, depth - 1)
        }
    }
    recurse(f, lo, mid, hi, fl, fm, fh, whole, tol, depth)
}

/// Radius of the absorbing ball for the `rho`-th mass moment at the given
/// anchor time.  `reference_moment` is the constant the decayed
/// initial-data term is measured against (often the family's declared
/// bound at entry, or just zero for the bare plateau radius).
pub fn absorbing_radius<T: Real>(
    gamma: T,
    beta: T,
    rho: T,
    anchor: T,
    hs_norm_sq: T,
    reference_moment: T,
    schedule: &Psi1Schedule<T>,
) -> Result<T> {
    let gap = gamma - beta;
    if !(gap > T::zero()) {
        return Err(Error::RegimeViolation(RegimeConstraint::GammaAboveBeta));
    }
    if !(rho.is_finite() && rho >= T::from_f64_lit(2.0)) {
        return Err(Error::BadMomentExponent(rho.as_f64()));
    }
    let m = rho / T::from_f64_lit(2.0);
    let (c1, c2) = moment_bound_constants(m)?;
    let noise_term = if hs_norm_sq > T::zero() {
        c1 * hs_norm_sq.powf(m) * gap.powf(-m)
    } else {
        T::zero()
    };
    let j = schedule.anchored_integral(gap * m, anchor, m)?;
    Ok(reference_moment + noise_term + c2 * gap.powf(T::one() - m) * j)
}

/// Configuration of a pullback absorption experiment.
#[derive(Debug, Clone)]
pub struct AbsorbingProbe<T> {
    /// Moment exponent `rho` (the ball lives in the `rho`-th mass moment).
    pub rho: T,
    /// Constant first term of the radius formula.
    pub reference_moment: T,
    /// Anchor times at which radii are evaluated.
    pub varrho_grid: Vec<T>,
    /// Increasing pullback horizons, each commensurate with `dt`.
    pub t_grid: Vec<T>,
    pub schedule: Psi1Schedule<T>,
    pub paths: usize,
    pub dt: T,
    pub scheme: SchemeId,
    pub guard: BlowupGuard<T>,
    pub seed: u64,
}

/// One (anchor, family) combination of the probe.
#[derive(Debug, Clone)]
pub struct ProbeCell<T> {
    pub anchor: T,
    pub family: String,
    pub radius: T,
    /// First horizon from which the moment estimate stays inside the
    /// ball (within three standard errors); `None` when never absorbed
    /// or when the cell was aborted by a blow-up.
    pub entry_time: Option<T>,
    /// True when some path of the family tripped the mass guard.
    pub flagged: bool,
}

/// Full result of [`pullback_absorption_probe`].
#[derive(Debug, Clone)]
pub struct AbsorptionReport<T> {
    pub rho: T,
    pub t_grid: Vec<T>,
    /// Per family: name, moment estimate per horizon, standard error per
    /// horizon.  Shared by all anchors (the dynamics are autonomous).
    pub family_curves: Vec<(String, Vec<T>, Vec<T>)>,
    pub cells: Vec<ProbeCell<T>>,
}

/// Measure empirical absorption: for each initial family, estimate
/// `E ||u(t)||^rho` along the horizon grid and report when it enters the
/// ball of radius `R(anchor)` for every configured anchor.
///
/// Increments are stationary and the shipped forcings autonomous, so one
/// ensemble per family serves every horizon: the horizon-`t` pullback
/// state has the law of the time-`t` state started at zero.
pub fn pullback_absorption_probe<T: Real>(
    probe: &AbsorbingProbe<T>,
    params: &ModelParams<T>,
    cov: Option<&CovarianceSpec<T>>,
    families: &[(String, SpectralField<T>)],
) -> Result<AbsorptionReport<T>> {
    if families.is_empty() {
        return Err(Error::BadEnsemble("no initial families".into()));
    }
    if probe.t_grid.is_empty() {
        return Err(Error::BadEnsemble("empty horizon grid".into()));
    }
    if probe.t_grid[0] < T::zero() {
        return Err(Error::BadPropagationTime(probe.t_grid[0].as_f64()));
    }
    for w in probe.t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::BadEnsemble(
                "horizon grid must be strictly increasing".into(),
            ));
        }
    }
    let m = probe.rho / T::from_f64_lit(2.0);
    let tr = cov.map_or_else(T::zero, |c| c.hs_norm_sq());

    // Horizon -> sample index on the fine time grid.
    let mut indices = Vec::with_capacity(probe.t_grid.len());
    for &t in &probe.t_grid {
        let ratio = (t / probe.dt).as_f64();
        let idx = ratio.round();
        if (ratio - idx).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::SpanNotCommensurate {
                t0: 0.0,
                t1: t.as_f64(),
                dt: probe.dt.as_f64(),
            });
        }
        indices.push(idx as usize);
    }
    let t_max = *probe.t_grid.last().unwrap();

    let mut family_curves = Vec::with_capacity(families.len());
    let mut flags = Vec::with_capacity(families.len());
    for (name, u0) in families {
        let (estimates, errors, flagged) = if t_max > T::zero() {
            let setup = RunSetup::new(probe.scheme, t_max, probe.dt).with_guard(probe.guard);
            let trajs = run_ensemble(params, cov, &setup, u0, probe.seed, probe.paths)?;
            let completed: Vec<_> = trajs.iter().filter(|t| t.completed()).collect();
            let flagged = completed.len() != trajs.len();
            if completed.is_empty() {
                let nan = vec![T::nan(); indices.len()];
                (nan.clone(), nan, true)
            } else {
                let rows: Vec<Vec<T>> = completed
                    .iter()
                    .map(|t| indices.iter().map(|&j| t.masses()[j].powf(m)).collect())
                    .collect();
                let stats = SeriesStats::from_rows(probe.t_grid.clone(), &rows)?;
                (stats.mean, stats.std_error, flagged)
            }
        } else {
            // Horizon grid collapsed to t = 0: no dynamics involved.
            let m0 = u0.l2_norm_sq().powf(m);
            (
                vec![m0; indices.len()],
                vec![T::zero(); indices.len()],
                false,
            )
        };
        family_curves.push((name.clone(), estimates, errors));
        flags.push(flagged);
    }

    let three = T::from_f64_lit(3.0);
    let mut cells = Vec::new();
    for &anchor in &probe.varrho_grid {
        let radius = absorbing_radius(
            params.gamma(),
            params.beta(),
            probe.rho,
            anchor,
            tr,
            probe.reference_moment,
            &probe.schedule,
        )?;
        for ((name, estimates, errors), &flagged) in family_curves.iter().zip(&flags) {
            let entry_time = if flagged {
                None
            } else {
                let inside: Vec<bool> = estimates
                    .iter()
                    .zip(errors)
                    .map(|(&mu, &se)| mu <= radius + three * se)
                    .collect();
                // First horizon from which the estimate never leaves.
                let mut entry = None;
                for i in (0..inside.len()).rev() {
                    if inside[i] {
                        entry = Some(probe.t_grid[i]);
                    } else {
                        break;
                    }
                }
                entry
            };
            cells.push(ProbeCell {
                anchor,
                family: name.clone(),
                radius,
                entry_time,
                flagged,
            });
        }
    }
    Ok(AbsorptionReport {
        rho: probe.rho,
        t_grid: probe.t_grid.clone(),
        family_curves,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ForcingSpec;
    use crate::scalar::Cplx;
    use crate::spectral::Grid;

    #[test]
    fn radius_reductions_match_hand_formulas() {
        // psi1 = 0, rho = 2: R = ref + C1(1) tr / gap with C1(1) = 1.
        let r = absorbing_radius(1.5f64, 0.5, 2.0, 0.0, 0.3, 2.0, &Psi1Schedule::Zero).unwrap();
        assert!((r - (2.0 + 0.3 / 1.0)).abs() < 1e-14);
        // No noise, no psi1: the radius is the reference moment alone.
        let r = absorbing_radius(1.0f64, 0.0, 4.0, 7.0, 0.0, 5.0, &Psi1Schedule::Zero).unwrap();
        assert!((r - 5.0).abs() < 1e-14);
        // Constant psi1, rho = 2: extra term C2(1) l1 / gap = 4 l1 / gap.
        let r = absorbing_radius(
            2.0f64,
            1.0,
            2.0,
            0.0,
            0.0,
            0.0,
            &Psi1Schedule::Constant { l1: 0.25 },
        )
        .unwrap();
        assert!((r - 4.0 * 0.25 / 1.0).abs() < 1e-14, "{r}");
        assert!(matches!(
            absorbing_radius(1.0, 1.0, 2.0, 0.0, 0.1, 0.0, &Psi1Schedule::Zero),
            Err(Error::RegimeViolation(RegimeConstraint::GammaAboveBeta))
        ));
        assert!(matches!(
            absorbing_radius(1.0, 0.0, 1.0, 0.0, 0.1, 0.0, &Psi1Schedule::Zero),
            Err(Error::BadMomentExponent(_))
        ));
    }

    #[test]
    fn closed_forms_agree_with_adaptive_quadrature() {
        let a = 1.3;
        let anchor = 0.7;
        let m = 1.5;
        let exp = Psi1Schedule::Exponential {
            l1_scale: 0.8,
            lambda: 0.4,
        };
        let generic = Psi1Schedule::General(Arc::new(move |s: f64| 0.8 * (0.4 * s).exp()));
        let closed = exp.anchored_integral(a, anchor, m).unwrap();
        let quad = generic.anchored_integral(a, anchor, m).unwrap();
        assert!((closed - quad).abs() <= 1e-6 * closed, "{closed} vs {quad}");

        let compact = Psi1Schedule::CompactSupport {
            l1: 0.9,
            s_start: -2.0,
            s_end: 0.3,
        };
        let generic =
            Psi1Schedule::General(Arc::new(
                move |s: f64| {
                    if (-2.0..=0.3).contains(&s) {
                        0.9
                    } else {
                        0.0
                    }
                },
            ));
        let closed = compact.anchored_integral(a, anchor, m).unwrap();
        let quad = generic.anchored_integral(a, anchor, m).unwrap();
        assert!((closed - quad).abs() <= 1e-5 * closed, "{closed} vs {quad}");
    }

    #[test]
    fn divergent_windows_are_detected() {
        let exp = Psi1Schedule::Exponential {
            l1_scale: 1.0,
            lambda: -2.0,
        };
        // a = 1, lambda m = -3: the window weight loses.
        assert!(matches!(
            exp.anchored_integral(1.0, 0.0, 1.5),
            Err(Error::DivergentForcingIntegral(_))
        ));
        let growing = Psi1Schedule::General(Arc::new(|s: f64| (-3.0 * s).exp()));
        assert!(matches!(
            growing.anchored_integral(1.0, 0.0, 1.0),
            Err(Error::DivergentForcingIntegral(_))
        ));
    }

    fn probe_family(g: Grid<f64>, mass: f64) -> SpectralField<f64> {
        let mut u = SpectralField::from_fn_physical(g, |x| Cplx::new(x[0].cos(), 0.0));
        let scale = (mass / u.l2_norm_sq()).sqrt();
        u.scale(Cplx::new(scale, 0.0));
        u
    }

    #[test]
    fn linear_probe_recovers_the_analytic_entry_time() {
        let g = Grid::new(1, 16, std::f64::consts::TAU).unwrap();
        let gamma = 1.0;
        let params = ModelParams::new(0.75, 0.0, gamma, ForcingSpec::zero(g)).unwrap();
        let cov = CovarianceSpec::builtin(g, 0.4, 2.0, 5).unwrap();
        let plateau = cov.hs_norm_sq() / (2.0 * gamma);

        let probe = AbsorbingProbe {
            rho: 2.0,
            reference_moment: 0.0,
            varrho_grid: vec![0.0, 1.0],
            t_grid: (0..=10).map(|i| 0.25 * i as f64).collect(),
            schedule: Psi1Schedule::Zero,
            paths: 150,
            dt: 5e-3,
            scheme: SchemeId::ExpEuler,
            guard: BlowupGuard::default(),
            seed: 71,
        };
        let big = probe_family(g, 25.0 * plateau);
        let small = probe_family(g, 0.5 * plateau);
        let report = pullback_absorption_probe(
            &probe,
            &params,
            Some(&cov),
            &[("big".into(), big), ("small".into(), small)],
        )
        .unwrap();

        // R = 2 * plateau; mean mass is plateau (1 + 24 e^(-2t)), so the
        // analytic entry is at ln(24) / 2 ~ 1.59.
        let t_star = 24.0f64.ln() / 2.0;
        for cell in report.cells.iter().filter(|c| c.family == "big") {
            let entry = cell.entry_time.expect("big family should be absorbed");
            assert!(
                (entry - t_star).abs() <= 0.5 + 1e-12,
                "entry {entry} vs analytic {t_star}"
            );
        }
        // The small family starts inside the ball.
        for cell in report.cells.iter().filter(|c| c.family == "small") {
            assert_eq!(cell.entry_time, Some(0.0));
            assert!(!cell.flagged);
        }
        // Radii at different anchors coincide for autonomous schedules.
        let radii: Vec<f64> = report.cells.iter().map(|c| c.radius).collect();
        assert!((radii[0] - 2.0 * plateau).abs() < 1e-12);
        assert!((radii[0] - radii[2]).abs() < 1e-15);
    }

    #[test]
    fn guard_tripped_families_are_flagged() {
        let g = Grid::new(1, 16, std::f64::consts::TAU).unwrap();
        let params = ModelParams::new(0.75, 0.0, 1.0, ForcingSpec::zero(g)).unwrap();
        let u0 = probe_family(g, 1.0);
        let probe = AbsorbingProbe {
            rho: 2.0,
            reference_moment: 0.0,
            varrho_grid: vec![0.0],
            t_grid: vec![0.5, 1.0],
            schedule: Psi1Schedule::Constant { l1: 0.0 },
            paths: 3,
            dt: 1e-2,
            scheme: SchemeId::ExpEuler,
            // Threshold below the initial mass: every path trips on arming.
            guard: BlowupGuard {
                mass_threshold: Some(0.5),
                consecutive_growth_limit: 5,
            },
            seed: 0,
        };
        let report =
            pullback_absorption_probe(&probe, &params, None, &[("hot".into(), u0)]).unwrap();
        assert!(report.cells.iter().all(|c| c.flagged));
        assert!(report.cells.iter().all(|c| c.entry_time.is_none()));
    }
}
