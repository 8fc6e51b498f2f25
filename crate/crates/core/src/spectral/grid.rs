//! Periodic lattice bookkeeping: coordinates, frequency bins, cell volume.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform periodic grid on `[0, L)^n` with `N` points per axis.
///
/// Storage order for flattened fields is row-major with the last axis
/// fastest.  `N` is restricted to powers of two so transform sizes stay
/// friendly and the dealiasing arithmetic is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    n: usize,
    points_per_dim: usize,
    box_length: T,
    cell_volume: T,
}

impl<T: Real> Grid<T> {
    /// Build a grid, validating dimension, point count, and box length.
    pub fn new(n: usize, points_per_dim: usize, box_length: T) -> Result<Self> {
        if n == 0 || n > 3 {
            return Err(Error::DimensionOutOfRange(n));
        }
        if points_per_dim < 2 || !points_per_dim.is_power_of_two() {
            return Err(Error::PointsNotPowerOfTwo(points_per_dim));
        }
        if !(box_length.is_finite() && box_length > T::zero()) {
            return Err(Error::BadBoxLength(box_length.as_f64()));
        }
        let spacing = box_length / T::from_f64_lit(points_per_dim as f64);
        let mut cell_volume = T::one();
        for _ in 0..n {
            cell_volume = cell_volume * spacing;
        }
        Ok(Self {
            n,
            points_per_dim,
            box_length,
            cell_volume,
        })
    }

    /// Spatial dimension `n` (1, 2, or 3).
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Points per axis `N`.
    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    /// Box length `L`.
    pub fn box_length(&self) -> T {
        self.box_length
    }

    /// Quadrature weight of one lattice cell, `(L/N)^n`.
    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }

    /// Total number of lattice points `N^n`.
    pub fn total_points(&self) -> usize {
        self.points_per_dim.pow(self.n as u32)
    }

    /// Box volume `L^n`.
    pub fn volume(&self) -> T {
        let mut v = T::one();
        for _ in 0..self.n {
            v = v * self.box_length;
        }
        v
    }

    /// Lattice spacing `L/N`.
    pub fn spacing(&self) -> T {
        self.box_length / T::from_f64_lit(self.points_per_dim as f64)
    }

    /// Frequency spacing `2*pi/L`.
    pub fn freq_spacing(&self) -> T {
        T::TAU() / self.box_length
    }

    /// Signed integer frequency coordinate for a per-axis bin index.
    ///
    /// Bins `0..N/2` map to `0..N/2`, bins `N/2..N` map to `-N/2..0`, so the
    /// lattice is `[-N/2, N/2)` with the Nyquist row on the negative side.
    pub fn freq_coord(&self, bin: usize) -> i64 {
        debug_assert!(bin < self.points_per_dim);
        let half = self.points_per_dim / 2;
        if bin < half {
            bin as i64
        } else {
            bin as i64 - self.points_per_dim as i64
        }
    }

    /// Split a flat index into per-axis bins (unused axes report 0).
    pub fn decompose(&self, flat: usize) -> [usize; 3] {
        debug_assert!(flat < self.total_points());
        let mut out = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.n).rev() {
            out[axis] = rest % self.points_per_dim;
            rest /= self.points_per_dim;
        }
        out
    }

    /// Flatten per-axis bins into a flat index.
    pub fn flatten(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.n);
        let mut flat = 0usize;
        for &i in idx.iter() {
            debug_assert!(i < self.points_per_dim);
            flat = flat * self.points_per_dim + i;
        }
        flat
    }

    /// Integer frequency coordinates of a flat frequency-space index.
    pub fn freq_coords(&self, flat: usize) -> [i64; 3] {
        let bins = self.decompose(flat);
        let mut m = [0i64; 3];
        for axis in 0..self.n {
            m[axis] = self.freq_coord(bins[axis]);
        }
        m
    }

    /// Squared frequency magnitude `|xi|^2` of a flat frequency index.
    pub fn freq_sq(&self, flat: usize) -> T {
        let m = self.freq_coords(flat);
        let dxi = self.freq_spacing();
        let mut acc = T::zero();
        for &mi in m.iter().take(self.n) {
            let x = dxi * T::from_f64_lit(mi as f64);
            acc = acc + x * x;
        }
        acc
    }

    /// Physical coordinates of a flat index (unused axes report 0).
    pub fn coords(&self, flat: usize) -> [T; 3] {
        let bins = self.decompose(flat);
        let dx = self.spacing();
        let mut x = [T::zero(); 3];
        for axis in 0..self.n {
            x[axis] = dx * T::from_f64_lit(bins[axis] as f64);
        }
        x
    }

    /// Largest integer frequency kept by the two-thirds dealiasing rule.
    pub fn dealias_limit(&self) -> i64 {
        (self.points_per_dim / 3) as i64
    }

    /// True if any axis of the flat frequency index carries the Nyquist row.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let m = self.freq_coords(flat);
        let nyq = -((self.points_per_dim / 2) as i64);
        m.iter().take(self.n).any(|&mi| mi == nyq)
    }
}
