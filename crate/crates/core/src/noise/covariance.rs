//! Diagonal covariance operator on the real trigonometric basis.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::noise::basis::{enumerate_modes, BasisMode, ModeKind};
use crate::scalar::{Cplx, Real};
use crate::spectral::{Grid, SpaceTag, SpectralField};

/// Frequency-space footprint of one real basis mode.
#[derive(Debug, Clone, Copy)]
struct FreqEntry {
    plus: usize,
    minus: usize,
    kind: ModeKind,
}

/// Covariance specification: per-mode amplitudes `phi_k >= 0` on the real
/// basis, with precomputed basis tables for synthesis and projection.
///
/// Cloning is cheap; the tables are shared.
#[derive(Clone)]
pub struct CovarianceSpec<T> {
    grid: Grid<T>,
    modes: Arc<[BasisMode]>,
    amplitudes: Arc<[T]>,
    hs_norm_sq: T,
    /// Unscaled basis values `e_k(x_j)`, row-major by mode.
    rows: Arc<[T]>,
    freq_entries: Arc<[FreqEntry]>,
    /// Unitary-DFT amplitude of the constant mode, `N^(n/2)/sqrt(V)`.
    const_amp: T,
    /// Unitary-DFT amplitude of a pair mode, `N^(n/2)/sqrt(2V)`.
    pair_amp: T,
}

impl<T: Real> CovarianceSpec<T> {
    /// Built-in spectral family `phi_k = a * (1 + |xi_k|^2)^(-s/2)` over the
    /// first `cutoff` modes in the canonical ordering.
    ///
    /// The decay rate must satisfy `s > n` (trace-class decay); the cutoff
    /// must not exceed the modes available inside the dealiasing band.
    pub fn builtin(grid: Grid<T>, scale: T, decay: T, cutoff: usize) -> Result<Self> {
        if !(scale.is_finite() && scale >= T::zero()) {
            return Err(Error::BadCovariance(format!(
                "scale {} must be finite and >= 0",
                scale.as_f64()
            )));
        }
        if !(decay.is_finite() && decay.as_f64() > grid.dim() as f64) {
            return Err(Error::BadCovariance(format!(
                "decay {} must exceed the dimension {}",
                decay.as_f64(),
                grid.dim()
            )));
        }
        let all = enumerate_modes(&grid);
        if cutoff == 0 || cutoff > all.len() {
            return Err(Error::BadCovariance(format!(
                "cutoff {} outside 1..={} modes available in the dealiased band",
                cutoff,
                all.len()
            )));
        }
        let modes: Vec<BasisMode> = all.into_iter().take(cutoff).collect();
        let dxi = grid.freq_spacing();
        let amplitudes: Vec<T> = modes
            .iter()
            .map(|m| {
                let xi_sq = dxi * dxi * T::from_f64_lit(m.freq_sq_int() as f64);
                scale * (T::one() + xi_sq).powf(-decay / T::from_f64_lit(2.0))
            })
            .collect();
        Self::from_parts(grid, modes, amplitudes)
    }

    /// Covariance with explicit amplitudes over the canonical mode ordering.
    pub fn from_amplitudes(grid: Grid<T>, amplitudes: Vec<T>) -> Result<Self> {
        let all = enumerate_modes(&grid);
        if amplitudes.is_empty() || amplitudes.len() > all.len() {
            return Err(Error::BadCovariance(format!(
                "amplitude count {} outside 1..={}",
                amplitudes.len(),
                all.len()
            )));
        }
        let modes: Vec<BasisMode> = all.into_iter().take(amplitudes.len()).collect();
        Self::from_parts(grid, modes, amplitudes)
    }

    fn from_parts(grid: Grid<T>, modes: Vec<BasisMode>, amplitudes: Vec<T>) -> Result<Self> {
        for &a in &amplitudes {
            if !(a.is_finite() && a >= T::zero()) {
                return Err(Error::BadCovariance(format!(
                    "amplitude {} must be finite and >= 0",
                    a.as_f64()
                )));
            }
        }
        let hs_norm_sq = amplitudes
            .iter()
            .map(|&a| a * a)
            .fold(T::zero(), |acc, x| acc + x);

        let total = grid.total_points();
        let volume = grid.volume();
        let inv_sqrt_v = T::one() / volume.sqrt();
        let sqrt_2_over_v = (T::from_f64_lit(2.0) / volume).sqrt();
        let dxi = grid.freq_spacing();

        let mut rows = Vec::with_capacity(modes.len() * total);
        let mut freq_entries = Vec::with_capacity(modes.len());
        for mode in &modes {
            match mode.kind {
                ModeKind::Constant => {
                    rows.extend(std::iter::repeat(inv_sqrt_v).take(total));
                }
                ModeKind::Cosine | ModeKind::Sine => {
                    for flat in 0..total {
                        let x = grid.coords(flat);
                        let mut phase = T::zero();
                        for axis in 0..grid.dim() {
                            phase = phase + dxi * T::from_f64_lit(mode.freq[axis] as f64) * x[axis];
                        }
                        let val = match mode.kind {
                            ModeKind::Cosine => phase.cos(),
                            _ => phase.sin(),
                        };
                        rows.push(sqrt_2_over_v * val);
                    }
                }
            }
            let mut plus_bins = [0usize; 3];
            let mut minus_bins = [0usize; 3];
            let pts = grid.points_per_dim() as i64;
            for axis in 0..grid.dim() {
                let m = mode.freq[axis];
                plus_bins[axis] = m.rem_euclid(pts) as usize;
                minus_bins[axis] = (-m).rem_euclid(pts) as usize;
            }
            freq_entries.push(FreqEntry {
                plus: grid.flatten(&plus_bins[..grid.dim()]),
                minus: grid.flatten(&minus_bins[..grid.dim()]),
                kind: mode.kind,
            });
        }

        let n_half = T::from_f64_lit(total as f64).sqrt();
        Ok(Self {
            grid,
            modes: modes.into(),
            amplitudes: amplitudes.into(),
            hs_norm_sq,
            rows: rows.into(),
            freq_entries: freq_entries.into(),
            const_amp: n_half * inv_sqrt_v,
            pair_amp: n_half / (T::from_f64_lit(2.0) * volume).sqrt(),
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn modes(&self) -> &[BasisMode] {
        &self.modes
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Hilbert-Schmidt norm `sqrt(sum phi_k^2)`.
    pub fn hs_norm(&self) -> T {
        self.hs_norm_sq.sqrt()
    }

    /// Squared Hilbert-Schmidt norm `sum phi_k^2`.
    pub fn hs_norm_sq(&self) -> T {
        self.hs_norm_sq
    }

    /// Unscaled values of basis mode `k` on the physical lattice.
    pub fn basis_row(&self, k: usize) -> &[T] {
        let total = self.grid.total_points();
        &self.rows[k * total..(k + 1) * total]
    }

    /// Accumulate `sum_k coeffs_k * e_k` into the real parts of `out`.
    ///
    /// Imaginary parts are untouched, so a zeroed buffer yields a field
    /// whose imaginary part is identically (bit) zero.
    pub fn accumulate_physical(&self, coeffs: &[T], out: &mut [Cplx<T>]) {
        debug_assert_eq!(coeffs.len(), self.mode_count());
        debug_assert_eq!(out.len(), self.grid.total_points());
        for (k, &c) in coeffs.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            for (o, &r) in out.iter_mut().zip(self.basis_row(k)) {
                o.re = o.re + c * r;
            }
        }
    }

    /// Build the physical-space field `sum_k coeffs_k * e_k`.
    pub fn synthesize_physical(&self, coeffs: &[T]) -> SpectralField<T> {
        let mut out = SpectralField::zeros(self.grid, SpaceTag::Physical);
        self.accumulate_physical(coeffs, out.values_mut());
        out
    }

    /// Visit the unitary-DFT coefficients of `sum_k coeffs_k * e_k`.
    ///
    /// Calls `visit(slot, value)` for every nonzero frequency component;
    /// pair modes contribute to both `+m` and `-m` slots.  This is the
    /// exact transform of the physical synthesis and lets linear solvers
    /// inject noise without leaving frequency space.
    pub fn for_each_freq_component(&self, coeffs: &[T], mut visit: impl FnMut(usize, Cplx<T>)) {
        debug_assert_eq!(coeffs.len(), self.mode_count());
        for (entry, &c) in self.freq_entries.iter().zip(coeffs.iter()) {
            if c == T::zero() {
                continue;
            }
            match entry.kind {
                ModeKind::Constant => {
                    visit(entry.plus, Cplx::new(self.const_amp * c, T::zero()));
                }
                ModeKind::Cosine => {
                    let v = self.pair_amp * c;
                    visit(entry.plus, Cplx::new(v, T::zero()));
                    visit(entry.minus, Cplx::new(v, T::zero()));
                }
                ModeKind::Sine => {
                    let v = self.pair_amp * c;
                    visit(entry.plus, Cplx::new(T::zero(), -v));
                    visit(entry.minus, Cplx::new(T::zero(), v));
                }
            }
        }
    }

    /// Project a physical-space field onto basis mode `k` (cell-volume
    /// weighted real inner product with `e_k`).
    pub fn project_mode(&self, values: &[Cplx<T>], k: usize) -> T {
        debug_assert_eq!(values.len(), self.grid.total_points());
        let mut acc = T::zero();
        for (v, &r) in values.iter().zip(self.basis_row(k)) {
            acc = acc + v.re * r;
        }
        acc * self.grid.cell_volume()
    }

    /// Imaginary-part pairing `Im(u, e_k)` of a complex field with mode `k`.
    pub fn im_pair_mode(&self, values: &[Cplx<T>], k: usize) -> T {
        debug_assert_eq!(values.len(), self.grid.total_points());
        let mut acc = T::zero();
        for (v, &r) in values.iter().zip(self.basis_row(k)) {
            acc = acc + v.im * r;
        }
        acc * self.grid.cell_volume()
    }
}
