//! Forcing families with certified growth bounds.
//!
//! Every built-in family ships the four bound profiles `psi1..psi4` that
//! make its growth assumptions true by construction:
//!
//! * `Im(f conj(u)) <= beta |u|^2 + psi1(x)` (energy growth),
//! * `|f| <= psi2(x) |u| + psi3(x)` (magnitude),
//! * `|f(t,x,u) - f(t,x,v)| <= psi4(x) |u - v|` (Lipschitz in `u`).
//!
//! [`check_assumptions`] re-verifies the three inequalities empirically on
//! probe fields, so a misdeclared custom forcing is caught rather than
//! silently corrupting downstream moment bounds.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};
use crate::spectral::{Grid, SpaceTag, SpectralField};

/// User-supplied forcing for tests and experiments: a pointwise closure
/// plus *declared* bound data.  The declaration is trusted by the solver
/// and policed by [`check_assumptions`].
#[derive(Clone)]
pub struct CustomForcing<T> {
    /// `(t, x, u) -> f(t, x, u)`.
    pub eval: Arc<dyn Fn(T, &[T], Cplx<T>) -> Cplx<T> + Send + Sync>,
    pub beta: T,
    pub psi1: Arc<[T]>,
    pub psi2: Arc<[T]>,
    pub psi3: Arc<[T]>,
    pub psi4: Arc<[T]>,
}

/// The forcing family and its coefficient data.
#[derive(Clone)]
pub enum ForcingFamily<T> {
    /// `f = 0`.
    Zero,
    /// `f = i c(x) u` with `0 <= c(x) <= beta`: a spatially varying phase
    /// twist whose energy-growth bound saturates wherever `c(x) = beta`.
    LinearPhase { c: Arc<[T]>, beta: T },
    /// `f = g(x)`, independent of `u`; the energy bound follows from
    /// Young's inequality with `psi1 = |g|^2 / (4 beta)`.
    Additive { g: Arc<[Cplx<T>]>, beta: T },
    /// `f = i c(x) u + g(x)`, exercising all four bound profiles.
    Combined {
        c: Arc<[T]>,
        g: Arc<[Cplx<T>]>,
        beta: T,
    },
    /// Escape hatch with declared bounds.
    Custom(CustomForcing<T>),
}

impl<T> std::fmt::Debug for ForcingFamily<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ForcingFamily::Zero => "Zero",
            ForcingFamily::LinearPhase { .. } => "LinearPhase",
            ForcingFamily::Additive { .. } => "Additive",
            ForcingFamily::Combined { .. } => "Combined",
            ForcingFamily::Custom(_) => "Custom",
        })
    }
}

/// A forcing term bound to a grid.
#[derive(Clone)]
pub struct ForcingSpec<T> {
    grid: Grid<T>,
    family: ForcingFamily<T>,
}

impl<T: Real> ForcingSpec<T> {
    /// The trivial forcing `f = 0`.
    pub fn zero(grid: Grid<T>) -> Self {
        Self {
            grid,
            family: ForcingFamily::Zero,
        }
    }

    /// `f = i c(x) u`; requires `0 <= c(x) <= beta` on the lattice.
    pub fn linear_phase(grid: Grid<T>, c: impl Fn(&[T]) -> T, beta: T) -> Result<Self> {
        if !(beta.is_finite() && beta >= T::zero()) {
            return Err(Error::BadForcing(format!(
                "growth constant beta {} must be finite and >= 0",
                beta.as_f64()
            )));
        }
        let profile = sample_real(&grid, c)?;
        for &v in &profile {
            if v < T::zero() || v > beta {
                return Err(Error::BadForcing(format!(
                    "phase profile value {} outside [0, beta = {}]",
                    v.as_f64(),
                    beta.as_f64()
                )));
            }
        }
        Ok(Self {
            grid,
            family: ForcingFamily::LinearPhase {
                c: profile.into(),
                beta,
            },
        })
    }

    /// `f = g(x)`; a nonzero profile requires `beta > 0` so the Young
    /// bound `psi1 = |g|^2/(4 beta)` is finite.
    pub fn additive(grid: Grid<T>, g: impl Fn(&[T]) -> Cplx<T>, beta: T) -> Result<Self> {
        if !(beta.is_finite() && beta >= T::zero()) {
            return Err(Error::BadForcing(format!(
                "growth constant beta {} must be finite and >= 0",
                beta.as_f64()
            )));
        }
        let profile = sample_complex(&grid, g)?;
        if beta == T::zero()
            && profile
                .iter()
                .any(|v| v.re != T::zero() || v.im != T::zero())
        {
            return Err(Error::BadForcing(
                "additive profile is nonzero but beta = 0 leaves no Young slack".into(),
            ));
        }
        Ok(Self {
            grid,
            family: ForcingFamily::Additive {
                g: profile.into(),
                beta,
            },
        })
    }

    /// `f = i c(x) u + g(x)`; requires `0 <= c(x) <= beta`, and when `g`
    /// is not identically zero, `max c(x) < beta` strictly (the leftover
    /// slack absorbs the additive part via Young's inequality).
    pub fn combined(
        grid: Grid<T>,
        c: impl Fn(&[T]) -> T,
        g: impl Fn(&[T]) -> Cplx<T>,
        beta: T,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta >= T::zero()) {
            return Err(Error::BadForcing(format!(
                "growth constant beta {} must be finite and >= 0",
                beta.as_f64()
            )));
        }
        let c_profile = sample_real(&grid, c)?;
        let g_profile = sample_complex(&grid, g)?;
        let mut c_max = T::zero();
        for &v in &c_profile {
            if v < T::zero() || v > beta {
                return Err(Error::BadForcing(format!(
                    "phase profile value {} outside [0, beta = {}]",
                    v.as_f64(),
                    beta.as_f64()
                )));
            }
            if v > c_max {
                c_max = v;
            }
        }
        let g_nonzero = g_profile
            .iter()
            .any(|v| v.re != T::zero() || v.im != T::zero());
        if g_nonzero && c_max >= beta {
            return Err(Error::BadForcing(
                "combined family needs max c(x) < beta strictly when g is nonzero".into(),
            ));
        }
        Ok(Self {
            grid,
            family: ForcingFamily::Combined {
                c: c_profile.into(),
                g: g_profile.into(),
                beta,
            },
        })
    }

    /// Wrap a [`CustomForcing`]; the declared bound profiles must match
    /// the lattice and be finite and nonnegative.
    pub fn custom(grid: Grid<T>, custom: CustomForcing<T>) -> Result<Self> {
        if !(custom.beta.is_finite() && custom.beta >= T::zero()) {
            return Err(Error::BadForcing(format!(
                "growth constant beta {} must be finite and >= 0",
                custom.beta.as_f64()
            )));
        }
        for (name, psi) in [
            ("psi1", &custom.psi1),
            ("psi2", &custom.psi2),
            ("psi3", &custom.psi3),
            ("psi4", &custom.psi4),
        ] {
            if psi.len() != grid.total_points() {
                return Err(Error::BadForcing(format!(
                    "{name} profile has {} samples, lattice has {}",
                    psi.len(),
                    grid.total_points()
                )));
            }
            if psi.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
                return Err(Error::BadForcing(format!(
                    "{name} profile must be finite and nonnegative"
                )));
            }
        }
        Ok(Self {
            grid,
            family: ForcingFamily::Custom(custom),
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn family(&self) -> &ForcingFamily<T> {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match &self.family {
            ForcingFamily::Zero => "zero",
            ForcingFamily::LinearPhase { .. } => "linear_phase",
            ForcingFamily::Additive { .. } => "additive",
            ForcingFamily::Combined { .. } => "combined",
            ForcingFamily::Custom(_) => "custom",
        }
    }

    /// True only for the literal zero family (used to skip forcing work).
    pub fn is_zero(&self) -> bool {
        matches!(self.family, ForcingFamily::Zero)
    }

    /// The declared growth constant `beta`.
    pub fn beta(&self) -> T {
        match &self.family {
            ForcingFamily::Zero => T::zero(),
            ForcingFamily::LinearPhase { beta, .. }
            | ForcingFamily::Additive { beta, .. }
            | ForcingFamily::Combined { beta, .. } => *beta,
            ForcingFamily::Custom(c) => c.beta,
        }
    }

    /// Evaluate `f(t, x, u(x))` into `out` (physical space).
    pub fn eval_into(&self, t: T, u: &[Cplx<T>], out: &mut [Cplx<T>]) {
        debug_assert_eq!(u.len(), self.grid.total_points());
        debug_assert_eq!(out.len(), u.len());
        match &self.family {
            ForcingFamily::Zero => out.fill(Cplx::new(T::zero(), T::zero())),
            ForcingFamily::LinearPhase { c, .. } => {
                for ((o, &cv), &uv) in out.iter_mut().zip(c.iter()).zip(u) {
                    // i * c * u = c * (-Im u + i Re u)
                    *o = Cplx::new(-cv * uv.im, cv * uv.re);
                }
            }
            ForcingFamily::Additive { g, .. } => out.copy_from_slice(g),
            ForcingFamily::Combined { c, g, .. } => {
                for (((o, &cv), &gv), &uv) in out.iter_mut().zip(c.iter()).zip(g.iter()).zip(u) {
                    *o = Cplx::new(gv.re - cv * uv.im, gv.im + cv * uv.re);
                }
            }
            ForcingFamily::Custom(custom) => {
                let dim = self.grid.dim();
                for (flat, (o, &uv)) in out.iter_mut().zip(u).enumerate() {
                    let x = self.grid.coords(flat);
                    *o = (custom.eval)(t, &x[..dim], uv);
                }
            }
        }
    }

    /// The four bound profiles `[psi1, psi2, psi3, psi4]` on the lattice.
    pub fn psi_profiles(&self) -> [Vec<T>; 4] {
        let total = self.grid.total_points();
        let zeros = || vec![T::zero(); total];
        match &self.family {
            ForcingFamily::Zero => [zeros(), zeros(), zeros(), zeros()],
            ForcingFamily::LinearPhase { c, .. } => [zeros(), c.to_vec(), zeros(), c.to_vec()],
            ForcingFamily::Additive { g, beta } => {
                let mags: Vec<T> = g.iter().map(|v| v.norm()).collect();
                let psi1 = if *beta > T::zero() {
                    let four_beta = T::from_f64_lit(4.0) * *beta;
                    g.iter().map(|v| v.norm_sqr() / four_beta).collect()
                } else {
                    zeros()
                };
                [psi1, zeros(), mags, zeros()]
            }
            ForcingFamily::Combined { c, g, beta } => {
                let mut c_max = T::zero();
                for &v in c.iter() {
                    if v > c_max {
                        c_max = v;
                    }
                }
                let slack = *beta - c_max;
                let g_nonzero = g.iter().any(|v| v.re != T::zero() || v.im != T::zero());
                let psi1 = if g_nonzero {
                    let four_slack = T::from_f64_lit(4.0) * slack;
                    g.iter().map(|v| v.norm_sqr() / four_slack).collect()
                } else {
                    zeros()
                };
                let mags: Vec<T> = g.iter().map(|v| v.norm()).collect();
                [psi1, c.to_vec(), mags, c.to_vec()]
            }
            ForcingFamily::Custom(custom) => [
                custom.psi1.to_vec(),
                custom.psi2.to_vec(),
                custom.psi3.to_vec(),
                custom.psi4.to_vec(),
            ],
        }
    }

    /// Spatial `L^1` norm of `psi1` (the integrated energy-growth
    /// offset), used by moment bounds and absorbing-radius formulas.
    pub fn psi1_l1(&self) -> T {
        let [psi1, _, _, _] = self.psi_profiles();
        psi1.iter().fold(T::zero(), |acc, &v| acc + v) * self.grid.cell_volume()
    }
}

/// Worst-case margins of the three growth inequalities over probe fields.
///
/// Each margin is `bound - actual` minimized over all probes and lattice
/// points; the check passes when every margin is `>= -1e-12`.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionReport<T> {
    pub probe_count: usize,
    /// min of `beta |u|^2 + psi1 - Im(f conj(u))`.
    pub growth_margin: T,
    /// min of `psi2 |u| + psi3 - |f|`.
    pub magnitude_margin: T,
    /// min over probe pairs of `psi4 |u - v| - |f(u) - f(v)|`.
    pub lipschitz_margin: T,
    pub passed: bool,
}

/// Evaluate `f(t, x, u(x))` for a physical-space field on the spec's grid.
pub fn forcing_eval<T: Real>(
    spec: &ForcingSpec<T>,
    t: T,
    field: &SpectralField<T>,
) -> Result<SpectralField<T>> {
    if field.tag() != SpaceTag::Physical {
        return Err(Error::SpaceMismatch {
            expected: SpaceTag::Physical.name(),
            found: field.tag().name(),
        });
    }
    if field.grid() != spec.grid() {
        return Err(Error::GridMismatch);
    }
    let mut out = SpectralField::zeros(*spec.grid(), SpaceTag::Physical);
    spec.eval_into(t, field.values(), out.values_mut());
    Ok(out)
}

/// Verify the three declared inequalities empirically on probe fields
/// (evaluated at `t = 0`; the built-in families are autonomous).
///
/// The Lipschitz inequality is tested on every unordered probe pair plus
/// each probe against the zero field.
pub fn check_assumptions<T: Real>(
    spec: &ForcingSpec<T>,
    probes: &[SpectralField<T>],
) -> Result<AssumptionReport<T>> {
    if probes.is_empty() {
        return Err(Error::BadForcing("probe set is empty".into()));
    }
    let total = spec.grid().total_points();
    for p in probes {
        if p.tag() != SpaceTag::Physical {
            return Err(Error::SpaceMismatch {
                expected: SpaceTag::Physical.name(),
                found: p.tag().name(),
            });
        }
        if p.grid() != spec.grid() {
            return Err(Error::GridMismatch);
        }
    }

    let [psi1, psi2, psi3, psi4] = spec.psi_profiles();
    let beta = spec.beta();
    let t0 = T::zero();

    let mut growth = T::infinity();
    let mut magnitude = T::infinity();
    let mut lipschitz = T::infinity();

    let mut f_buf = vec![Cplx::new(T::zero(), T::zero()); total];
    let mut forcings: Vec<Vec<Cplx<T>>> = Vec::with_capacity(probes.len() + 1);
    for p in probes {
        spec.eval_into(t0, p.values(), &mut f_buf);
        for (j, (&u, &f)) in p.values().iter().zip(f_buf.iter()).enumerate() {
            let mod_sq = u.re * u.re + u.im * u.im;
            let im_f_ubar = f.im * u.re - f.re * u.im;
            let m1 = beta * mod_sq + psi1[j] - im_f_ubar;
            if m1 < growth {
                growth = m1;
            }
            let m2 = psi2[j] * mod_sq.sqrt() + psi3[j] - f.norm();
            if m2 < magnitude {
                magnitude = m2;
            }
        }
        forcings.push(f_buf.clone());
    }

    // Zero field as an extra Lipschitz anchor.
    let zero_field = vec![Cplx::new(T::zero(), T::zero()); total];
    spec.eval_into(t0, &zero_field, &mut f_buf);
    forcings.push(f_buf);

    let value_of = |i: usize| -> &[Cplx<T>] {
        if i < probes.len() {
            probes[i].values()
        } else {
            &zero_field
        }
    };
    for i in 0..forcings.len() {
        for k in (i + 1)..forcings.len() {
            let (ui, uk) = (value_of(i), value_of(k));
            for j in 0..total {
                let du = ui[j] - uk[j];
                let df = forcings[i][j] - forcings[k][j];
                let m3 = psi4[j] * du.norm() - df.norm();
                if m3 < lipschitz {
                    lipschitz = m3;
                }
            }
        }
    }

    let tol = T::from_f64_lit(-1e-12);
    Ok(AssumptionReport {
        probe_count: probes.len(),
        growth_margin: growth,
        magnitude_margin: magnitude,
        lipschitz_margin: lipschitz,
        passed: growth >= tol && magnitude >= tol && lipschitz >= tol,
    })
}

fn sample_real<T: Real>(grid: &Grid<T>, f: impl Fn(&[T]) -> T) -> Result<Vec<T>> {
    let dim = grid.dim();
    let mut out = Vec::with_capacity(grid.total_points());
    for flat in 0..grid.total_points() {
        let x = grid.coords(flat);
        let v = f(&x[..dim]);
        if !v.is_finite() {
            return Err(Error::BadForcing("profile sample is not finite".into()));
        }
        out.push(v);
    }
    Ok(out)
}

fn sample_complex<T: Real>(grid: &Grid<T>, f: impl Fn(&[T]) -> Cplx<T>) -> Result<Vec<Cplx<T>>> {
    let dim = grid.dim();
    let mut out = Vec::with_capacity(grid.total_points());
    for flat in 0..grid.total_points() {
        let x = grid.coords(flat);
        let v = f(&x[..dim]);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::BadForcing("profile sample is not finite".into()));
        }
        out.push(v);
    }
    Ok(out)
}
