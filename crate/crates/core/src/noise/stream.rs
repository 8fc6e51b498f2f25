//! Wiener-increment generation: streaming draws and frozen Brownian paths.
//!
//! Determinism contract: increments are a pure function of
//! `(seed, path_index, draw counter)`.  Each path index selects an
//! independent stream of the underlying counter-based generator, so
//! ensemble members can be produced in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::noise::covariance::CovarianceSpec;
use crate::scalar::Real;

/// One Wiener increment, stored as per-mode coefficients
/// `c_k = phi_k * sqrt(dt) * g_k` with `g_k` i.i.d. standard normal.
#[derive(Debug, Clone)]
pub struct WienerIncrement<T> {
    pub dt: T,
    pub coeffs: Vec<T>,
}

impl<T: Real> WienerIncrement<T> {
    pub fn zeros(mode_count: usize, dt: T) -> Self {
        Self {
            dt,
            coeffs: vec![T::zero(); mode_count],
        }
    }
}

/// Streaming generator of Wiener increments for one sample path.
pub struct NoiseStream<T> {
    spec: CovarianceSpec<T>,
    rng: ChaCha12Rng,
    draws: u64,
}

impl<T: Real> NoiseStream<T> {
    /// Stream for sample path `path_index` of ensemble seed `seed`.
    pub fn new(spec: CovarianceSpec<T>, seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        Self {
            spec,
            rng,
            draws: 0,
        }
    }

    pub fn spec(&self) -> &CovarianceSpec<T> {
        &self.spec
    }

    /// Number of increments drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Fill `out.coeffs` with a fresh increment over a step of length `dt`.
    pub fn sample_into(&mut self, dt: T, out: &mut WienerIncrement<T>) {
        debug_assert_eq!(out.coeffs.len(), self.spec.mode_count());
        let sqrt_dt = dt.sqrt();
        for (c, &amp) in out.coeffs.iter_mut().zip(self.spec.amplitudes()) {
            *c = amp * sqrt_dt * T::standard_normal(&mut self.rng);
        }
        out.dt = dt;
        self.draws += 1;
    }

    /// Draw a fresh increment over a step of length `dt`.
    pub fn sample(&mut self, dt: T) -> WienerIncrement<T> {
        let mut out = WienerIncrement::zeros(self.spec.mode_count(), dt);
        self.sample_into(dt, &mut out);
        out
    }
}

/// A Brownian path pre-sampled at a fine resolution, so that coarser
/// solvers can consume *exactly* the same randomness: a coarse increment
/// is the exact sum of the fine increments it spans.
#[derive(Debug, Clone)]
pub struct BrownianPath<T> {
    dt_fine: T,
    mode_count: usize,
    /// Step-major coefficients: increment `i` occupies
    /// `coeffs[i*mode_count..(i+1)*mode_count]`.
    coeffs: Vec<T>,
}

impl<T: Real> BrownianPath<T> {
    /// Pre-sample `steps` fine increments of length `dt_fine`.
    pub fn generate(
        spec: &CovarianceSpec<T>,
        seed: u64,
        path_index: u64,
        dt_fine: T,
        steps: usize,
    ) -> Result<Self> {
        if !(dt_fine.is_finite() && dt_fine > T::zero()) {
            return Err(Error::BadTimeStep(dt_fine.as_f64()));
        }
        let mut stream = NoiseStream::new(spec.clone(), seed, path_index);
        let mode_count = spec.mode_count();
        let mut coeffs = vec![T::zero(); steps * mode_count];
        let mut inc = WienerIncrement::zeros(mode_count, dt_fine);
        for i in 0..steps {
            stream.sample_into(dt_fine, &mut inc);
            coeffs[i * mode_count..(i + 1) * mode_count].copy_from_slice(&inc.coeffs);
        }
        Ok(Self {
            dt_fine,
            mode_count,
            coeffs,
        })
    }

    pub fn dt_fine(&self) -> T {
        self.dt_fine
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn fine_steps(&self) -> usize {
        if self.mode_count == 0 {
            0
        } else {
            self.coeffs.len() / self.mode_count
        }
    }

    /// Sum `stride` consecutive fine increments starting at fine index
    /// `start`, producing one coarse increment of length `stride * dt_fine`.
    pub fn coarse_increment_into(
        &self,
        start: usize,
        stride: usize,
        out: &mut WienerIncrement<T>,
    ) -> Result<()> {
        debug_assert_eq!(out.coeffs.len(), self.mode_count);
        if stride == 0 || start + stride > self.fine_steps() {
            return Err(Error::IncrementLogMissing);
        }
        out.coeffs.fill(T::zero());
        for i in start..start + stride {
            let row = &self.coeffs[i * self.mode_count..(i + 1) * self.mode_count];
            for (c, &r) in out.coeffs.iter_mut().zip(row) {
                *c = *c + r;
            }
        }
        out.dt = T::from_f64_lit(stride as f64) * self.dt_fine;
        Ok(())
    }
}

/// Where a solver gets its Wiener increments.
pub enum NoiseSource<'a, T> {
    /// Draw fresh increments from a stream.
    Stream(NoiseStream<T>),
    /// Replay a frozen fine path, summing `stride` fine increments per
    /// solver step (for coupled step-size refinement studies).
    Frozen {
        path: &'a BrownianPath<T>,
        stride: usize,
        cursor: usize,
    },
    /// Deterministic dynamics: every increment is zero.
    None,
}

impl<'a, T: Real> NoiseSource<'a, T> {
    /// Replay `path` with a solver step of `stride` fine steps.
    pub fn frozen(path: &'a BrownianPath<T>, stride: usize) -> Result<Self> {
        if stride == 0 || path.fine_steps() % stride != 0 {
            return Err(Error::IncrementLogMissing);
        }
        Ok(NoiseSource::Frozen {
            path,
            stride,
            cursor: 0,
        })
    }

    /// Produce the next increment for a step of length `dt`.
    ///
    /// For a frozen source, `dt` must equal `stride * dt_fine` of the
    /// underlying path (up to roundoff); the stored fine sum is returned
    /// regardless, keeping the coupling exact.
    pub fn next_increment(&mut self, dt: T, out: &mut WienerIncrement<T>) -> Result<()> {
        match self {
            NoiseSource::Stream(stream) => {
                stream.sample_into(dt, out);
                Ok(())
            }
            NoiseSource::Frozen {
                path,
                stride,
                cursor,
            } => {
                path.coarse_increment_into(*cursor, *stride, out)?;
                *cursor += *stride;
                Ok(())
            }
            NoiseSource::None => {
                out.coeffs.fill(T::zero());
                out.dt = dt;
                Ok(())
            }
        }
    }

    /// True when increments are identically zero.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, NoiseSource::None)
    }
}
