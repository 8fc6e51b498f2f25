//! Unitary multi-axis FFTs built on batched one-dimensional transforms.
//!
//! Axis passes run the contiguous last axis directly and bring the other
//! axes into contiguous position by square (in-place) or slab (scratch)
//! transposes.  Both directions carry the `1/sqrt(N^n)` factor, so forward
//! and inverse are mutually inverse and norm-preserving.

use std::sync::Arc;

use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};
use crate::spectral::{Grid, SpaceTag, SpectralField};

/// Immutable transform plan for one grid shape, shareable across threads.
pub struct TransformPlan<T: Real> {
    dim: usize,
    len: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    scale: T,
}

/// Reusable scratch buffers for in-place transforms.
pub struct TransformScratch<T> {
    fft: Vec<Cplx<T>>,
    transpose: Vec<Cplx<T>>,
}

impl<T: Real> TransformPlan<T> {
    pub fn new(grid: &Grid<T>) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft(grid.points_per_dim(), FftDirection::Forward);
        let inv = planner.plan_fft(grid.points_per_dim(), FftDirection::Inverse);
        let scale = T::one() / T::from_f64_lit(grid.total_points() as f64).sqrt();
        Self {
            dim: grid.dim(),
            len: grid.points_per_dim(),
            fwd,
            inv,
            scale,
        }
    }

    /// Allocate scratch sized for this plan.
    pub fn make_scratch(&self) -> TransformScratch<T> {
        let fft_len = self
            .fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len());
        let transpose_len = if self.dim == 3 {
            self.len * self.len * self.len
        } else {
            0
        };
        TransformScratch {
            fft: vec![Cplx::new(T::zero(), T::zero()); fft_len],
            transpose: vec![Cplx::new(T::zero(), T::zero()); transpose_len],
        }
    }

    /// Physical -> frequency, in place.
    pub fn forward_in_place(&self, values: &mut [Cplx<T>], scratch: &mut TransformScratch<T>) {
        self.all_axes(values, scratch, true);
    }

    /// Frequency -> physical, in place.
    pub fn inverse_in_place(&self, values: &mut [Cplx<T>], scratch: &mut TransformScratch<T>) {
        self.all_axes(values, scratch, false);
    }

    fn all_axes(&self, values: &mut [Cplx<T>], scratch: &mut TransformScratch<T>, forward: bool) {
        debug_assert_eq!(values.len(), self.len.pow(self.dim as u32));
        let fft = if forward { &self.fwd } else { &self.inv };
        let n = self.len;
        match self.dim {
            1 => {
                fft.process_with_scratch(values, &mut scratch.fft);
            }
            2 => {
                fft.process_with_scratch(values, &mut scratch.fft);
                transpose_square(values, n);
                fft.process_with_scratch(values, &mut scratch.fft);
                transpose_square(values, n);
            }
            3 => {
                // Last axis: already contiguous.
                fft.process_with_scratch(values, &mut scratch.fft);
                // Middle axis: square transpose inside each leading slab.
                for slab in values.chunks_mut(n * n) {
                    transpose_square(slab, n);
                }
                fft.process_with_scratch(values, &mut scratch.fft);
                for slab in values.chunks_mut(n * n) {
                    transpose_square(slab, n);
                }
                // First axis: bring stride-N^2 lanes into rows via a
                // rectangular transpose through scratch.
                let rows = n;
                let cols = n * n;
                let buf = &mut scratch.transpose;
                for i in 0..rows {
                    for j in 0..cols {
                        buf[j * rows + i] = values[i * cols + j];
                    }
                }
                fft.process_with_scratch(buf, &mut scratch.fft);
                for i in 0..rows {
                    for j in 0..cols {
                        values[i * cols + j] = buf[j * rows + i];
                    }
                }
            }
            _ => unreachable!("grid dimension validated at construction"),
        }
        for v in values.iter_mut() {
            *v = Cplx::new(v.re * self.scale, v.im * self.scale);
        }
    }
}

fn transpose_square<T: Copy>(values: &mut [Cplx<T>], n: usize) {
    debug_assert_eq!(values.len(), n * n);
    for i in 0..n {
        for j in (i + 1)..n {
            values.swap(i * n + j, j * n + i);
        }
    }
}

/// Transform a physical-space field to frequency space.
pub fn forward_transform<T: Real>(
    field: &SpectralField<T>,
    plan: &TransformPlan<T>,
) -> Result<SpectralField<T>> {
    if field.tag() != SpaceTag::Physical {
        return Err(Error::SpaceMismatch {
            expected: SpaceTag::Physical.name(),
            found: field.tag().name(),
        });
    }
    let mut values = field.values().to_vec();
    let mut scratch = plan.make_scratch();
    plan.forward_in_place(&mut values, &mut scratch);
    Ok(field.with_values(SpaceTag::Frequency, values))
}

/// Transform a frequency-space field back to the physical lattice.
pub fn inverse_transform<T: Real>(
    field: &SpectralField<T>,
    plan: &TransformPlan<T>,
) -> Result<SpectralField<T>> {
    if field.tag() != SpaceTag::Frequency {
        return Err(Error::SpaceMismatch {
            expected: SpaceTag::Frequency.name(),
            found: field.tag().name(),
        });
    }
    let mut values = field.values().to_vec();
    let mut scratch = plan.make_scratch();
    plan.inverse_in_place(&mut values, &mut scratch);
    Ok(field.with_values(SpaceTag::Physical, values))
}
