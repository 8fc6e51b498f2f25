//! Model parameters and the well-posedness regime report.

use crate::dynamics::forcing::ForcingSpec;
use crate::error::{Error, RegimeConstraint, Result};
use crate::scalar::Real;
use crate::spectral::Grid;

/// Per-constraint verdicts for the well-posedness / attractor regime.
///
/// The solver runs outside the regime on request; diagnostics that rely on
/// a particular constraint consult this report and disable themselves when
/// it fails instead of refusing the whole run.
#[derive(Debug, Clone, Copy)]
pub struct RegimeReport<T> {
    /// `n >= 2`.
    pub dim_ok: bool,
    /// `alpha >= n/(2n-1)`.
    pub alpha_lower_ok: bool,
    /// `alpha < 1`.
    pub alpha_upper_ok: bool,
    /// `sigma >= 0`.
    pub sigma_nonneg_ok: bool,
    /// `sigma < 2 alpha/(n - 2 alpha)` (vacuous when `n <= 2 alpha`).
    pub sigma_upper_ok: bool,
    /// `gamma > beta`.
    pub damping_ok: bool,
    /// The threshold `n/(2n-1)`.
    pub alpha_lower: T,
    /// The threshold `2 alpha/(n - 2 alpha)`, infinite when `n <= 2 alpha`.
    pub sigma_upper: T,
    /// The forcing growth constant the damping was compared against.
    pub beta: T,
}

impl<T: Real> RegimeReport<T> {
    /// Local/global well-posedness constraints (dimension, alpha, sigma).
    pub fn well_posed(&self) -> bool {
        self.dim_ok
            && self.alpha_lower_ok
            && self.alpha_upper_ok
            && self.sigma_nonneg_ok
            && self.sigma_upper_ok
    }

    /// All constraints including `gamma > beta` (needed by the long-time
    /// moment bounds and absorption diagnostics).
    pub fn all_ok(&self) -> bool {
        self.well_posed() && self.damping_ok
    }

    /// The failed constraints, in a fixed reporting order.
    pub fn violations(&self) -> Vec<RegimeConstraint> {
        let mut out = Vec::new();
        if !self.dim_ok {
            out.push(RegimeConstraint::Dimension);
        }
        if !self.alpha_lower_ok {
            out.push(RegimeConstraint::AlphaLowerBound);
        }
        if !self.alpha_upper_ok {
            out.push(RegimeConstraint::AlphaUpperBound);
        }
        if !self.sigma_nonneg_ok {
            out.push(RegimeConstraint::SigmaNonnegative);
        }
        if !self.sigma_upper_ok {
            out.push(RegimeConstraint::SigmaUpperBound);
        }
        if !self.damping_ok {
            out.push(RegimeConstraint::GammaAboveBeta);
        }
        out
    }

    /// First violated constraint as an error, or `Ok(())`.
    pub fn require_all(&self) -> Result<()> {
        match self.violations().first() {
            Some(&c) => Err(Error::RegimeViolation(c)),
            None => Ok(()),
        }
    }
}

/// Evaluate every regime constraint; never errors (reporting only).
pub fn validate_regime<T: Real>(
    n: usize,
    alpha: T,
    sigma: T,
    gamma: T,
    beta: T,
) -> RegimeReport<T> {
    let nf = T::from_f64_lit(n as f64);
    let two = T::from_f64_lit(2.0);
    let alpha_lower = nf / (two * nf - T::one());
    let denom = nf - two * alpha;
    let sigma_upper = if denom > T::zero() {
        two * alpha / denom
    } else {
        T::infinity()
    };
    RegimeReport {
        dim_ok: n >= 2,
        alpha_lower_ok: alpha >= alpha_lower,
        alpha_upper_ok: alpha < T::one(),
        sigma_nonneg_ok: sigma >= T::zero(),
        sigma_upper_ok: sigma < sigma_upper,
        damping_ok: gamma > beta,
        alpha_lower,
        sigma_upper,
        beta,
    }
}

/// Coefficients of the damped stochastic model: dimension, fractional
/// order, nonlinearity power, damping, and the forcing term.
///
/// Construction validates only basic ranges (`alpha` in `(0, 1]`,
/// `sigma >= 0`, `gamma >= 0`); the long-time-regime constraints are reported
/// by [`RegimeReport`] so that conservative reference runs (`gamma = 0`)
/// and the classical-Laplacian limit (`alpha = 1`) stay expressible.
#[derive(Clone)]
pub struct ModelParams<T> {
    dim: usize,
    alpha: T,
    sigma: T,
    gamma: T,
    forcing: ForcingSpec<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn new(alpha: T, sigma: T, gamma: T, forcing: ForcingSpec<T>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > T::zero() && alpha <= T::one()) {
            return Err(Error::BadAlpha(alpha.as_f64()));
        }
        if !(sigma.is_finite() && sigma >= T::zero()) {
            return Err(Error::BadSigma(sigma.as_f64()));
        }
        if !(gamma.is_finite() && gamma >= T::zero()) {
            return Err(Error::BadGamma(gamma.as_f64()));
        }
        Ok(Self {
            dim: forcing.grid().dim(),
            alpha,
            sigma,
            gamma,
            forcing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn forcing(&self) -> &ForcingSpec<T> {
        &self.forcing
    }

    pub fn grid(&self) -> &Grid<T> {
        self.forcing.grid()
    }

    /// The forcing's declared growth constant `beta`.
    pub fn beta(&self) -> T {
        self.forcing.beta()
    }

    /// Regime report for these coefficients.
    pub fn regime(&self) -> RegimeReport<T> {
        validate_regime(self.dim, self.alpha, self.sigma, self.gamma, self.beta())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid<f64> {
        Grid::new(2, 8, 1.0).unwrap()
    }

    #[test]
    fn reference_point_passes_every_constraint() {
        let r = validate_regime(2usize, 0.75f64, 1.0, 1.0, 0.1);
        assert!(r.all_ok(), "violations: {:?}", r.violations());
        assert!((r.alpha_lower - 2.0 / 3.0).abs() < 1e-15);
        // sigma bound 2*0.75/(2-1.5) = 3
        assert!((r.sigma_upper - 3.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_cases_fail_the_right_constraint() {
        let r = validate_regime(2usize, 0.4, 0.5, 1.0, 0.0);
        assert!(!r.alpha_lower_ok);
        assert_eq!(r.violations(), vec![RegimeConstraint::AlphaLowerBound]);

        // alpha at the lower edge is allowed (closed end), sigma bound =
        // (4/3)/(2/3) = 2 so sigma = 1 is fine.
        let r = validate_regime(2usize, 2.0 / 3.0, 1.0, 1.0, 0.0);
        assert!(r.alpha_lower_ok && r.sigma_upper_ok);

        let r = validate_regime(2usize, 0.75, 3.0, 1.0, 0.0);
        assert_eq!(r.violations(), vec![RegimeConstraint::SigmaUpperBound]);

        let r = validate_regime(2usize, 0.75, 1.0, 0.5, 0.5);
        assert_eq!(r.violations(), vec![RegimeConstraint::GammaAboveBeta]);
        assert!(r.well_posed() && !r.all_ok());

        let r = validate_regime(1usize, 0.9, 0.5, 1.0, 0.0);
        assert!(!r.dim_ok);
        assert!(r.require_all().is_err());
    }

    #[test]
    fn sigma_bound_is_vacuous_when_dimension_below_two_alpha() {
        let r = validate_regime(1usize, 0.75f64, 100.0, 1.0, 0.0);
        assert!(r.sigma_upper.is_infinite());
        assert!(r.sigma_upper_ok);
    }

    #[test]
    fn params_validate_basic_ranges() {
        let f = ForcingSpec::zero(grid());
        assert!(ModelParams::new(0.75, 1.0, 1.0, f.clone()).is_ok());
        // Classical limit and undamped runs are expressible.
        assert!(ModelParams::new(1.0, 0.0, 0.0, f.clone()).is_ok());
        assert!(matches!(
            ModelParams::new(0.0, 1.0, 1.0, f.clone()),
            Err(Error::BadAlpha(_))
        ));
        assert!(matches!(
            ModelParams::new(1.5, 1.0, 1.0, f.clone()),
            Err(Error::BadAlpha(_))
        ));
        assert!(matches!(
            ModelParams::new(0.75, -1.0, 1.0, f.clone()),
            Err(Error::BadSigma(_))
        ));
        assert!(matches!(
            ModelParams::new(0.75, 1.0, -0.1, f),
            Err(Error::BadGamma(_))
        ));
    }

    #[test]
    fn params_surface_grid_and_regime() {
        let f = ForcingSpec::zero(grid());
        let p = ModelParams::new(0.75, 1.0, 1.0, f).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.beta(), 0.0);
        assert!(p.regime().all_ok());
    }
}
