//! Frequency-space stepping for linear runs (`sigma = 0`, zero forcing).
//!
//! With no nonlinearity the whole step is diagonal in frequency space:
//! the propagator is an elementwise multiply and the noise increment only
//! touches the frequency slots of the driven basis modes.  States stay in
//! frequency space for the entire run; the discrete mass and the
//! left-endpoint noise pairing are computed there, which is exact because
//! the transform is unitary.

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::integrator::cache::{SchemeId, StepperCache};
use crate::integrator::stepper::StepRecord;
use crate::integrator::trajectory::RecordingLevel;
use crate::noise::{CovarianceSpec, WienerIncrement};
use crate::scalar::{Cplx, Real};
use crate::spectral::{compensated_sum, SpaceTag, SpectralField};

pub(crate) struct FastStepper<T: Real> {
    cache: StepperCache<T>,
    cov: Option<CovarianceSpec<T>>,
}

impl<T: Real> FastStepper<T> {
    /// The fast route applies when the step is linear and no per-mode
    /// physical projections were requested.
    pub(crate) fn eligible(params: &ModelParams<T>, recording: RecordingLevel) -> bool {
        params.sigma() == T::zero() && params.forcing().is_zero() && !recording.wants_modes()
    }

    pub(crate) fn new(
        params: &ModelParams<T>,
        cov: Option<&CovarianceSpec<T>>,
        dt: T,
    ) -> Result<Self> {
        let grid = *params.grid();
        if let Some(c) = cov {
            if c.grid() != &grid {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self {
            cache: StepperCache::new(grid, params.alpha(), params.gamma(), dt)?,
            cov: cov.cloned(),
        })
    }

    /// Transform the initial state to frequency space and apply the
    /// dealiasing mask once.
    pub(crate) fn prepare(&self, u0: &SpectralField<T>) -> Result<Vec<Cplx<T>>> {
        if u0.tag() != SpaceTag::Physical {
            return Err(Error::SpaceMismatch {
                expected: SpaceTag::Physical.name(),
                found: u0.tag().name(),
            });
        }
        if u0.grid() != self.cache.grid() {
            return Err(Error::GridMismatch);
        }
        let mut state = u0.values().to_vec();
        let mut scratch = self.cache.plan().make_scratch();
        self.cache.plan().forward_in_place(&mut state, &mut scratch);
        let zero = Cplx::new(T::zero(), T::zero());
        for (v, &keep) in state.iter_mut().zip(self.cache.mask()) {
            if !keep {
                *v = zero;
            }
        }
        Ok(state)
    }

    /// Discrete mass of a frequency-space state (unitary transform makes
    /// this identical to the physical-space mass).
    pub(crate) fn mass(&self, state: &[Cplx<T>]) -> T {
        compensated_sum(state.iter().map(|v| v.re * v.re + v.im * v.im))
            * self.cache.grid().cell_volume()
    }

    pub(crate) fn step(
        &self,
        scheme: SchemeId,
        state: &mut [Cplx<T>],
        inc: &WienerIncrement<T>,
    ) -> Result<StepRecord<T>> {
        let im_u_dw = self.left_pairing(state, inc)?;
        match scheme {
            SchemeId::ExpEuler => {
                self.inject(state, inc);
                for (v, m) in state.iter_mut().zip(self.cache.full_step()) {
                    *v = *v * *m;
                }
            }
            SchemeId::Strang => {
                for (v, m) in state.iter_mut().zip(self.cache.half_open()) {
                    *v = *v * *m;
                }
                self.inject(state, inc);
                for (v, m) in state.iter_mut().zip(self.cache.half_close()) {
                    *v = *v * *m;
                }
            }
        }
        Ok(StepRecord {
            mass_after: self.mass(state),
            im_u_dw,
            im_u_f: T::zero(),
        })
    }

    /// Return a physical-space copy of the state.
    pub(crate) fn to_physical(&self, state: &[Cplx<T>]) -> SpectralField<T> {
        let mut values = state.to_vec();
        let mut scratch = self.cache.plan().make_scratch();
        self.cache
            .plan()
            .inverse_in_place(&mut values, &mut scratch);
        SpectralField::from_values(*self.cache.grid(), SpaceTag::Physical, values)
            .expect("state length matches the grid")
    }

    /// `Im <u, dW>` against the pre-step state, summed over the sparse
    /// frequency footprint of the increment.
    fn left_pairing(&self, state: &[Cplx<T>], inc: &WienerIncrement<T>) -> Result<T> {
        let Some(cov) = &self.cov else {
            return Ok(T::zero());
        };
        if inc.coeffs.len() != cov.mode_count() {
            return Err(Error::BadCovariance(format!(
                "increment carries {} modes, covariance has {}",
                inc.coeffs.len(),
                cov.mode_count()
            )));
        }
        let mut acc = T::zero();
        cov.for_each_freq_component(&inc.coeffs, |slot, v| {
            let u = state[slot];
            acc = acc + (u.im * v.re - u.re * v.im);
        });
        Ok(acc * self.cache.grid().cell_volume())
    }

    /// Add `-i dW` on the driven frequency slots.
    fn inject(&self, state: &mut [Cplx<T>], inc: &WienerIncrement<T>) {
        if let Some(cov) = &self.cov {
            cov.for_each_freq_component(&inc.coeffs, |slot, v| {
                state[slot].re = state[slot].re + v.im;
                state[slot].im = state[slot].im - v.re;
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ForcingSpec;
    use crate::integrator::stepper::Stepper;
    use crate::noise::NoiseStream;
    use crate::spectral::Grid;

    fn grid() -> Grid<f64> {
        Grid::new(2, 16, std::f64::consts::TAU).unwrap()
    }

    fn linear_params(g: Grid<f64>, gamma: f64) -> ModelParams<f64> {
        ModelParams::new(0.75, 0.0, gamma, ForcingSpec::zero(g)).unwrap()
    }

    fn initial(g: Grid<f64>) -> SpectralField<f64> {
        SpectralField::from_fn_physical(g, |x| {
            Cplx::new(
                (x[0]).cos() - 0.2 * (x[1] * 2.0).sin(),
                0.4 * (x[0] + x[1]).cos(),
            )
        })
    }

    #[test]
    fn matches_the_generic_stepper_on_noisy_linear_runs() {
        let g = grid();
        let params = linear_params(g, 0.8);
        let cov = CovarianceSpec::builtin(g, 0.6, 3.0, 9).unwrap();
        let dt = 5e-3;

        let fast = FastStepper::new(&params, Some(&cov), dt).unwrap();
        let mut generic = Stepper::new(&params, Some(&cov), dt).unwrap();

        for scheme in [SchemeId::ExpEuler, SchemeId::Strang] {
            let mut phys = initial(g);
            generic.dealias_in_place(&mut phys).unwrap();
            let mut freq = fast.prepare(&initial(g)).unwrap();

            let mut stream = NoiseStream::new(cov.clone(), 77, 0);
            for j in 0..40 {
                let inc = stream.sample(dt);
                let rec_g = generic
                    .step(scheme, &mut phys, j as f64 * dt, &inc)
                    .unwrap();
                let rec_f = fast.step(scheme, &mut freq, &inc).unwrap();
                assert!(
                    (rec_g.mass_after - rec_f.mass_after).abs() < 1e-12 * (1.0 + rec_g.mass_after),
                    "{scheme}: mass {} vs {}",
                    rec_g.mass_after,
                    rec_f.mass_after
                );
                assert!(
                    (rec_g.im_u_dw - rec_f.im_u_dw).abs() < 1e-12,
                    "{scheme}: pairing {} vs {}",
                    rec_g.im_u_dw,
                    rec_f.im_u_dw
                );
            }
            let back = fast.to_physical(&freq);
            for (a, b) in back.values().iter().zip(phys.values()) {
                assert!((a - b).norm() < 1e-11, "{scheme}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn damping_is_exact_in_frequency_space() {
        let g = grid();
        let gamma = 1.0;
        let params = linear_params(g, gamma);
        let dt = 0.01;
        let fast = FastStepper::new(&params, None, dt).unwrap();
        let mut state = fast.prepare(&initial(g)).unwrap();
        let m0 = fast.mass(&state);
        let inc = WienerIncrement::zeros(0, dt);
        let mut mass = m0;
        for _ in 0..100 {
            mass = fast
                .step(SchemeId::ExpEuler, &mut state, &inc)
                .unwrap()
                .mass_after;
        }
        let expect = m0 * (-2.0 * gamma).exp();
        assert!((mass - expect).abs() < 1e-12 * expect.max(1.0) * 100.0);
    }

    #[test]
    fn eligibility_requires_linear_dynamics() {
        let g = grid();
        assert!(FastStepper::eligible(
            &linear_params(g, 1.0),
            RecordingLevel::Ledger
        ));
        assert!(!FastStepper::eligible(
            &linear_params(g, 1.0),
            RecordingLevel::LedgerWithModes
        ));
        let nonlinear = ModelParams::new(0.75, 1.0, 1.0, ForcingSpec::zero(g)).unwrap();
        assert!(!FastStepper::eligible(&nonlinear, RecordingLevel::MassOnly));
        let forced = ModelParams::new(
            0.75,
            0.0,
            1.0,
            ForcingSpec::linear_phase(g, |_| 0.1, 0.1).unwrap(),
        )
        .unwrap();
        assert!(!FastStepper::eligible(&forced, RecordingLevel::MassOnly));
    }
}
