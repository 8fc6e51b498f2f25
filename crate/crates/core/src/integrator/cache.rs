//! Per-run precomputation: combined step multipliers and the default
//! time-step rule.

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};
use crate::spectral::{dealias_mask, Grid, MultiplierCache, TransformPlan};

/// Time-stepping scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeId {
    ExpEuler,
    Strang,
}

impl SchemeId {
    pub fn name(self) -> &'static str {
        match self {
            SchemeId::ExpEuler => "exp_euler",
            SchemeId::Strang => "strang",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp_euler" => Some(SchemeId::ExpEuler),
            "strang" => Some(SchemeId::Strang),
            _ => None,
        }
    }
}

impl std::fmt::Display for SchemeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Default step so the stiffest retained mode rotates at most `pi/4` per
/// step: `dt * max |xi|^(2 alpha) <= pi/4`.  Both schemes treat the
/// linear part exactly, so this is an accuracy rule, not a stability one.
pub fn suggested_dt<T: Real>(grid: &Grid<T>, alpha: T) -> T {
    let limit = grid.dealias_limit();
    let m_sq = limit * limit * grid.dim() as i64;
    if m_sq == 0 {
        return T::one();
    }
    let dxi = grid.freq_spacing();
    let xi_sq = dxi * dxi * T::from_f64_lit(m_sq as f64);
    let sym_max = xi_sq.powf(alpha);
    T::PI() / (T::from_f64_lit(4.0) * sym_max)
}

/// Immutable per-run tables: the transform plan, the dealiasing mask, and
/// the damped propagator multipliers for a full step and for the two
/// Strang half-steps (closing half carries the mask).
pub struct StepperCache<T: Real> {
    grid: Grid<T>,
    alpha: T,
    gamma: T,
    dt: T,
    plan: TransformPlan<T>,
    mask: Vec<bool>,
    full_step: Vec<Cplx<T>>,
    half_open: Vec<Cplx<T>>,
    half_close: Vec<Cplx<T>>,
}

impl<T: Real> StepperCache<T> {
    pub fn new(grid: Grid<T>, alpha: T, gamma: T, dt: T) -> Result<Self> {
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(Error::BadTimeStep(dt.as_f64()));
        }
        if !(gamma.is_finite() && gamma >= T::zero()) {
            return Err(Error::BadGamma(gamma.as_f64()));
        }
        let multipliers = MultiplierCache::new(grid, alpha)?;
        let symbol = multipliers.symbol();
        let mask = dealias_mask(&grid);

        let half_dt = dt / T::from_f64_lit(2.0);
        let damp_full = (-gamma * dt).exp();
        let damp_half = (-gamma * half_dt).exp();
        let zero = Cplx::new(T::zero(), T::zero());

        let mut full_step = Vec::with_capacity(symbol.len());
        let mut half_open = Vec::with_capacity(symbol.len());
        let mut half_close = Vec::with_capacity(symbol.len());
        for (k, &s) in symbol.iter().enumerate() {
            let theta_full = dt * s;
            let theta_half = half_dt * s;
            let full = Cplx::new(damp_full * theta_full.cos(), -damp_full * theta_full.sin());
            let half = Cplx::new(damp_half * theta_half.cos(), -damp_half * theta_half.sin());
            half_open.push(half);
            if mask[k] {
                full_step.push(full);
                half_close.push(half);
            } else {
                full_step.push(zero);
                half_close.push(zero);
            }
        }

        Ok(Self {
            grid,
            alpha,
            gamma,
            dt,
            plan: TransformPlan::new(&grid),
            mask,
            full_step,
            half_open,
            half_close,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn plan(&self) -> &TransformPlan<T> {
        &self.plan
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Masked full-step multiplier `e^(-gamma dt) e^(-i dt |xi|^(2 alpha))`.
    pub fn full_step(&self) -> &[Cplx<T>] {
        &self.full_step
    }

    /// Unmasked opening half-step multiplier.
    pub fn half_open(&self) -> &[Cplx<T>] {
        &self.half_open
    }

    /// Masked closing half-step multiplier.
    pub fn half_close(&self) -> &[Cplx<T>] {
        &self.half_close
    }
}
