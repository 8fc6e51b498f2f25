//! Fourier multipliers: fractional dispersion symbol, propagators, dealiasing.

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};
use crate::spectral::TransformPlan;
use crate::spectral::{forward_transform, inverse_transform, Grid, SpaceTag, SpectralField};

/// Precomputed symbol table `|xi|^(2*alpha)` over the frequency lattice.
///
/// `alpha = 1` is stored as the exact squared frequency so the fractional
/// operator coincides bit-for-bit with the classical spectral Laplacian.
pub struct MultiplierCache<T> {
    grid: Grid<T>,
    alpha: T,
    symbol: Vec<T>,
}

impl<T: Real> MultiplierCache<T> {
    /// Build the symbol table.  `alpha` must lie in `(0, 1]`.
    pub fn new(grid: Grid<T>, alpha: T) -> Result<Self> {
        if !(alpha.is_finite() && alpha > T::zero() && alpha <= T::one()) {
            return Err(Error::BadAlpha(alpha.as_f64()));
        }
        let classical = alpha == T::one();
        let symbol = (0..grid.total_points())
            .map(|k| {
                let q = grid.freq_sq(k);
                if classical {
                    q
                } else {
                    q.powf(alpha)
                }
            })
            .collect();
        Ok(Self {
            grid,
            alpha,
            symbol,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Symbol values indexed by flat frequency index.
    pub fn symbol(&self) -> &[T] {
        &self.symbol
    }
}

/// Mask of frequency bins kept by the two-thirds rule.
///
/// A bin survives when every axis satisfies `|m_i| <= floor(N/3)`; the
/// Nyquist row `m = -N/2` always exceeds the limit and is removed.
pub fn dealias_mask<T: Real>(grid: &Grid<T>) -> Vec<bool> {
    let limit = grid.dealias_limit();
    (0..grid.total_points())
        .map(|k| {
            let m = grid.freq_coords(k);
            m.iter().take(grid.dim()).all(|&mi| mi.abs() <= limit)
        })
        .collect()
}

/// Zero all masked-out coefficients of a frequency-space field.
pub fn apply_dealias<T: Real>(field: &mut SpectralField<T>, mask: &[bool]) -> Result<()> {
    if field.tag() != SpaceTag::Frequency {
        return Err(Error::SpaceMismatch {
            expected: SpaceTag::Frequency.name(),
            found: field.tag().name(),
        });
    }
    for (v, &keep) in field.values_mut().iter_mut().zip(mask.iter()) {
        if !keep {
            *v = Cplx::new(T::zero(), T::zero());
        }
    }
    Ok(())
}

fn check_same_grid<T: Real>(field: &SpectralField<T>, cache: &MultiplierCache<T>) -> Result<()> {
    if field.grid() != cache.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Apply a per-bin complex factor in frequency space, preserving the
/// representation the caller handed in.
fn apply_in_frequency<T: Real>(
    field: &SpectralField<T>,
    plan: &TransformPlan<T>,
    mut factor: impl FnMut(usize) -> Cplx<T>,
) -> Result<SpectralField<T>> {
    let mut work = match field.tag() {
        SpaceTag::Frequency => field.clone(),
        SpaceTag::Physical => forward_transform(field, plan)?,
    };
    for (k, v) in work.values_mut().iter_mut().enumerate() {
        *v = *v * factor(k);
    }
    match field.tag() {
        SpaceTag::Frequency => Ok(work),
        SpaceTag::Physical => inverse_transform(&work, plan),
    }
}

/// Fractional dispersion operator: multiply by `|xi|^(2*alpha)`.
pub fn frac_laplacian<T: Real>(
    field: &SpectralField<T>,
    cache: &MultiplierCache<T>,
    plan: &TransformPlan<T>,
) -> Result<SpectralField<T>> {
    check_same_grid(field, cache)?;
    let sym = cache.symbol();
    apply_in_frequency(field, plan, |k| Cplx::new(sym[k], T::zero()))
}

/// Free group action: multiply by the unit phase `exp(-i*t*|xi|^(2*alpha))`.
pub fn free_propagator<T: Real>(
    field: &SpectralField<T>,
    t: T,
    cache: &MultiplierCache<T>,
    plan: &TransformPlan<T>,
) -> Result<SpectralField<T>> {
    check_same_grid(field, cache)?;
    if !t.is_finite() {
        return Err(Error::BadPropagationTime(t.as_f64()));
    }
    let sym = cache.symbol();
    apply_in_frequency(field, plan, |k| {
        let theta = t * sym[k];
        Cplx::new(theta.cos(), -theta.sin())
    })
}

/// Damped propagator: the free phase scaled by `exp(-gamma*t)`.
pub fn damped_propagator<T: Real>(
    field: &SpectralField<T>,
    t: T,
    gamma: T,
    cache: &MultiplierCache<T>,
    plan: &TransformPlan<T>,
) -> Result<SpectralField<T>> {
    check_same_grid(field, cache)?;
    if !(t.is_finite() && t >= T::zero()) {
        return Err(Error::BadPropagationTime(t.as_f64()));
    }
    if !(gamma.is_finite() && gamma >= T::zero()) {
        return Err(Error::BadGamma(gamma.as_f64()));
    }
    let decay = (-gamma * t).exp();
    let sym = cache.symbol();
    apply_in_frequency(field, plan, |k| {
        let theta = t * sym[k];
        Cplx::new(decay * theta.cos(), -decay * theta.sin())
    })
}
