//! Physical-space stepping for the full nonlinear model.

use crate::dynamics::{nonlinearity_into, rotate_nonlinear_phase, ModelParams};
use crate::error::{Error, Result};
use crate::integrator::cache::{SchemeId, StepperCache};
use crate::noise::{CovarianceSpec, WienerIncrement};
use crate::scalar::{Cplx, Real};
use crate::spectral::{compensated_sum, SpaceTag, SpectralField, TransformScratch};

/// Scalars recorded during one step.  The pairings are left-endpoint
/// (computed against the state *before* the step), as the Ito mass
/// balance requires.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<T> {
    pub mass_after: T,
    pub im_u_dw: T,
    pub im_u_f: T,
}

/// Reusable stepping context: parameters, covariance, multiplier tables,
/// and scratch buffers.  One `Stepper` serves one `(grid, dt)` pair.
pub struct Stepper<T: Real> {
    params: ModelParams<T>,
    cov: Option<CovarianceSpec<T>>,
    cache: StepperCache<T>,
    scratch: TransformScratch<T>,
    work: Vec<Cplx<T>>,
    nl_buf: Vec<Cplx<T>>,
    f_buf: Vec<Cplx<T>>,
    noise_buf: Vec<Cplx<T>>,
    sigma_active: bool,
    forcing_active: bool,
}

impl<T: Real> Stepper<T> {
    pub fn new(params: &ModelParams<T>, cov: Option<&CovarianceSpec<T>>, dt: T) -> Result<Self> {
        let grid = *params.grid();
        if let Some(c) = cov {
            if c.grid() != &grid {
                return Err(Error::GridMismatch);
            }
        }
        let cache = StepperCache::new(grid, params.alpha(), params.gamma(), dt)?;
        let scratch = cache.plan().make_scratch();
        let zero = Cplx::new(T::zero(), T::zero());
        let total = grid.total_points();
        Ok(Self {
            params: params.clone(),
            cov: cov.cloned(),
            scratch,
            work: vec![zero; total],
            nl_buf: vec![zero; total],
            f_buf: vec![zero; total],
            noise_buf: vec![zero; total],
            sigma_active: params.sigma() > T::zero(),
            forcing_active: !params.forcing().is_zero(),
            cache,
        })
    }

    pub fn cache(&self) -> &StepperCache<T> {
        &self.cache
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn covariance(&self) -> Option<&CovarianceSpec<T>> {
        self.cov.as_ref()
    }

    /// Project a physical field onto the dealiased band (used once on the
    /// initial data so the evolution starts inside the retained band).
    pub fn dealias_in_place(&mut self, u: &mut SpectralField<T>) -> Result<()> {
        self.check_state(u)?;
        let vals = u.values_mut();
        self.cache.plan().forward_in_place(vals, &mut self.scratch);
        let zero = Cplx::new(T::zero(), T::zero());
        for (v, &keep) in vals.iter_mut().zip(self.cache.mask()) {
            if !keep {
                *v = zero;
            }
        }
        self.cache.plan().inverse_in_place(vals, &mut self.scratch);
        Ok(())
    }

    /// Left-endpoint projections `Im(u, e_k)` for every noise mode.
    pub fn mode_projections_into(&self, u: &SpectralField<T>, out: &mut [T]) {
        if let Some(cov) = &self.cov {
            debug_assert_eq!(out.len(), cov.mode_count());
            for (k, o) in out.iter_mut().enumerate() {
                *o = cov.im_pair_mode(u.values(), k);
            }
        }
    }

    pub fn step(
        &mut self,
        scheme: SchemeId,
        u: &mut SpectralField<T>,
        t: T,
        inc: &WienerIncrement<T>,
    ) -> Result<StepRecord<T>> {
        match scheme {
            SchemeId::ExpEuler => self.step_exp_euler(u, t, inc),
            SchemeId::Strang => self.step_strang(u, t, inc),
        }
    }

    /// One exponential Euler step:
    /// `u+ = P(dt) [ u + dt (i |u|^(2 sigma) u - i f) - i dW ]`
    /// with `P` the masked damped propagator and every stochastic or
    /// nonlinear quantity evaluated at the left endpoint.
    pub fn step_exp_euler(
        &mut self,
        u: &mut SpectralField<T>,
        t: T,
        inc: &WienerIncrement<T>,
    ) -> Result<StepRecord<T>> {
        self.check_state(u)?;
        let dt = self.cache.dt();
        let (im_u_dw, im_u_f, noise_present) = self.prepare_terms(u, t, inc)?;

        self.work.copy_from_slice(u.values());
        if self.sigma_active {
            let sigma = self.params.sigma();
            nonlinearity_into(u.values(), sigma, &mut self.nl_buf);
            for (w, n) in self.work.iter_mut().zip(&self.nl_buf) {
                // + i dt N
                w.re = w.re - dt * n.im;
                w.im = w.im + dt * n.re;
            }
        }
        if self.forcing_active {
            for (w, f) in self.work.iter_mut().zip(&self.f_buf) {
                // - i dt f
                w.re = w.re + dt * f.im;
                w.im = w.im - dt * f.re;
            }
        }
        if noise_present {
            for (w, n) in self.work.iter_mut().zip(&self.noise_buf) {
                // - i dW
                w.re = w.re + n.im;
                w.im = w.im - n.re;
            }
        }

        self.cache
            .plan()
            .forward_in_place(&mut self.work, &mut self.scratch);
        for (w, m) in self.work.iter_mut().zip(self.cache.full_step()) {
            *w = *w * *m;
        }
        self.cache
            .plan()
            .inverse_in_place(&mut self.work, &mut self.scratch);
        u.values_mut().copy_from_slice(&self.work);

        Ok(StepRecord {
            mass_after: u.l2_norm_sq(),
            im_u_dw,
            im_u_f,
        })
    }

    /// One Strang step: half propagator, exact nonlinear rotation, Euler
    /// injection of `-i dt f - i dW` (forcing at the left endpoint), half
    /// propagator.  The closing half carries the dealiasing mask.
    pub fn step_strang(
        &mut self,
        u: &mut SpectralField<T>,
        t: T,
        inc: &WienerIncrement<T>,
    ) -> Result<StepRecord<T>> {
        self.check_state(u)?;
        let dt = self.cache.dt();
        let (im_u_dw, im_u_f, noise_present) = self.prepare_terms(u, t, inc)?;

        self.work.copy_from_slice(u.values());
        self.cache
            .plan()
            .forward_in_place(&mut self.work, &mut self.scratch);
        for (w, m) in self.work.iter_mut().zip(self.cache.half_open()) {
            *w = *w * *m;
        }
        self.cache
            .plan()
            .inverse_in_place(&mut self.work, &mut self.scratch);

        if self.sigma_active {
            rotate_nonlinear_phase(&mut self.work, self.params.sigma(), dt);
        }
        if self.forcing_active {
            for (w, f) in self.work.iter_mut().zip(&self.f_buf) {
                w.re = w.re + dt * f.im;
                w.im = w.im - dt * f.re;
            }
        }
        if noise_present {
            for (w, n) in self.work.iter_mut().zip(&self.noise_buf) {
                w.re = w.re + n.im;
                w.im = w.im - n.re;
            }
        }

        self.cache
            .plan()
            .forward_in_place(&mut self.work, &mut self.scratch);
        for (w, m) in self.work.iter_mut().zip(self.cache.half_close()) {
            *w = *w * *m;
        }
        self.cache
            .plan()
            .inverse_in_place(&mut self.work, &mut self.scratch);
        u.values_mut().copy_from_slice(&self.work);

        Ok(StepRecord {
            mass_after: u.l2_norm_sq(),
            im_u_dw,
            im_u_f,
        })
    }

    /// Evaluate forcing and synthesize the noise increment at the left
    /// endpoint; returns the two recorded pairings and whether any noise
    /// was injected.
    fn prepare_terms(
        &mut self,
        u: &SpectralField<T>,
        t: T,
        inc: &WienerIncrement<T>,
    ) -> Result<(T, T, bool)> {
        let w = self.cache.grid().cell_volume();
        let im_u_f = if self.forcing_active {
            self.params
                .forcing()
                .eval_into(t, u.values(), &mut self.f_buf);
            im_inner_raw(u.values(), &self.f_buf, w)
        } else {
            T::zero()
        };

        let mut noise_present = false;
        let mut im_u_dw = T::zero();
        if let Some(cov) = &self.cov {
            if inc.coeffs.len() != cov.mode_count() {
                return Err(Error::BadCovariance(format!(
                    "increment carries {} modes, covariance has {}",
                    inc.coeffs.len(),
                    cov.mode_count()
                )));
            }
            if inc.coeffs.iter().any(|c| *c != T::zero()) {
                let zero = Cplx::new(T::zero(), T::zero());
                self.noise_buf.fill(zero);
                cov.accumulate_physical(&inc.coeffs, &mut self.noise_buf);
                im_u_dw = im_inner_raw(u.values(), &self.noise_buf, w);
                noise_present = true;
            }
        }
        Ok((im_u_dw, im_u_f, noise_present))
    }

    fn check_state(&self, u: &SpectralField<T>) -> Result<()> {
        if u.tag() != SpaceTag::Physical {
            return Err(Error::SpaceMismatch {
                expected: SpaceTag::Physical.name(),
                found: u.tag().name(),
            });
        }
        if u.grid() != self.cache.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// `Im <a, b> = Im sum a conj(b) * cell_volume` on raw slices.
pub(crate) fn im_inner_raw<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>], cell_volume: T) -> T {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x.im * y.re - x.re * y.im)) * cell_volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ForcingSpec;
    use crate::spectral::Grid;

    fn grid() -> Grid<f64> {
        Grid::new(2, 16, std::f64::consts::TAU).unwrap()
    }

    fn band_limited_state(g: Grid<f64>) -> SpectralField<f64> {
        SpectralField::from_fn_physical(g, |x| {
            Cplx::new(
                (x[0]).cos() + 0.5 * (2.0 * x[1]).sin(),
                0.3 * (x[0] + x[1]).sin(),
            )
        })
    }

    fn linear_params(g: Grid<f64>, gamma: f64) -> ModelParams<f64> {
        ModelParams::new(0.75, 0.0, gamma, ForcingSpec::zero(g)).unwrap()
    }

    #[test]
    fn deterministic_linear_step_damps_the_norm_exactly() {
        let g = grid();
        let gamma = 1.25;
        let params = linear_params(g, gamma);
        let dt = 0.01;
        let mut stepper = Stepper::new(&params, None, dt).unwrap();
        let mut u = band_limited_state(g);
        stepper.dealias_in_place(&mut u).unwrap();
        let m0 = u.l2_norm_sq();
        let inc = WienerIncrement::zeros(0, dt);
        let mut mass = m0;
        for j in 0..200 {
            let rec = stepper.step_exp_euler(&mut u, j as f64 * dt, &inc).unwrap();
            mass = rec.mass_after;
            assert_eq!(rec.im_u_dw, 0.0);
            assert_eq!(rec.im_u_f, 0.0);
        }
        let expect = m0 * (-2.0 * gamma * 2.0).exp();
        assert!(
            (mass - expect).abs() < 1e-12 * expect.max(1.0) * 200.0,
            "mass {mass} vs {expect}"
        );
    }

    #[test]
    fn strang_matches_exp_euler_in_the_pure_linear_case() {
        // With sigma = 0 and no forcing/noise both schemes reduce to the
        // exact propagator, so they agree to roundoff.
        let g = grid();
        let params = linear_params(g, 0.7);
        let dt = 0.02;
        let mut a = Stepper::new(&params, None, dt).unwrap();
        let mut b = Stepper::new(&params, None, dt).unwrap();
        let mut ua = band_limited_state(g);
        let mut ub = ua.clone();
        a.dealias_in_place(&mut ua).unwrap();
        b.dealias_in_place(&mut ub).unwrap();
        let inc = WienerIncrement::zeros(0, dt);
        for j in 0..50 {
            a.step_exp_euler(&mut ua, j as f64 * dt, &inc).unwrap();
            b.step_strang(&mut ub, j as f64 * dt, &inc).unwrap();
        }
        for (x, y) in ua.values().iter().zip(ub.values()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn strang_conserves_mass_without_damping_forcing_or_noise() {
        let g = grid();
        let params = ModelParams::new(0.75, 1.0, 0.0, ForcingSpec::zero(g)).unwrap();
        let dt = 1e-3;
        let mut stepper = Stepper::new(&params, None, dt).unwrap();
        // Data supported on |m| <= 1 per axis: the phase rotation's
        // second-order term still lands inside the kept band, so the
        // dealiasing clip is third order and far below the tolerance.
        let mut u = SpectralField::from_fn_physical(g, |x| {
            Cplx::new(0.6 * x[0].cos() + 0.4 * x[1].sin(), 0.3 * x[1].cos())
        });
        stepper.dealias_in_place(&mut u).unwrap();
        let m0 = u.l2_norm_sq();
        let inc = WienerIncrement::zeros(0, dt);
        let mut mass = m0;
        for j in 0..300 {
            mass = stepper
                .step_strang(&mut u, j as f64 * dt, &inc)
                .unwrap()
                .mass_after;
        }
        assert!(
            ((mass - m0) / m0).abs() <= 1e-10,
            "relative drift {}",
            (mass - m0) / m0
        );
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid();
        let params = ModelParams::new(0.75, 1.0, 0.5, ForcingSpec::zero(g)).unwrap();
        let mut stepper = Stepper::new(&params, None, 0.01).unwrap();
        let mut u = SpectralField::zeros(g, SpaceTag::Physical);
        let inc = WienerIncrement::zeros(0, 0.01);
        for scheme in [SchemeId::ExpEuler, SchemeId::Strang] {
            let rec = stepper.step(scheme, &mut u, 0.0, &inc).unwrap();
            assert_eq!(rec.mass_after, 0.0);
        }
        assert!(u.values().iter().all(|v| v.re == 0.0 && v.im == 0.0));
    }

    #[test]
    fn left_endpoint_forcing_pairing_is_recorded() {
        let g = grid();
        // f = i c u makes Im(u, f) = -c ||u||^2 exactly.
        let c = 0.2;
        let forcing = ForcingSpec::linear_phase(g, |_| c, c).unwrap();
        let params = ModelParams::new(0.75, 0.0, 0.3, forcing).unwrap();
        let mut stepper = Stepper::new(&params, None, 0.01).unwrap();
        let mut u = band_limited_state(g);
        stepper.dealias_in_place(&mut u).unwrap();
        let m0 = u.l2_norm_sq();
        let inc = WienerIncrement::zeros(0, 0.01);
        let rec = stepper.step_exp_euler(&mut u, 0.0, &inc).unwrap();
        assert!(
            (rec.im_u_f + c * m0).abs() < 1e-12 * m0,
            "got {}, expected {}",
            rec.im_u_f,
            -c * m0
        );
    }

    #[test]
    fn rejects_wrong_space_grid_or_increment_size() {
        let g = grid();
        let params = linear_params(g, 1.0);
        let cov = CovarianceSpec::builtin(g, 0.5, 3.0, 5).unwrap();
        let mut stepper = Stepper::new(&params, Some(&cov), 0.01).unwrap();

        let mut freq = SpectralField::zeros(g, SpaceTag::Frequency);
        let inc = WienerIncrement::zeros(5, 0.01);
        assert!(matches!(
            stepper.step_exp_euler(&mut freq, 0.0, &inc),
            Err(Error::SpaceMismatch { .. })
        ));

        let other: Grid<f64> = Grid::new(2, 8, std::f64::consts::TAU).unwrap();
        let mut wrong = SpectralField::zeros(other, SpaceTag::Physical);
        assert!(matches!(
            stepper.step_exp_euler(&mut wrong, 0.0, &inc),
            Err(Error::GridMismatch)
        ));

        let mut u = band_limited_state(g);
        let bad_inc = WienerIncrement {
            dt: 0.01,
            coeffs: vec![1.0; 3],
        };
        assert!(matches!(
            stepper.step_exp_euler(&mut u, 0.0, &bad_inc),
            Err(Error::BadCovariance(_))
        ));

        let cov_mismatch = CovarianceSpec::builtin(other, 0.5, 3.0, 5).unwrap();
        assert!(matches!(
            Stepper::new(&params, Some(&cov_mismatch), 0.01),
            Err(Error::GridMismatch)
        ));
    }
}
