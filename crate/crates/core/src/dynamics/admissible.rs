//! Admissible exponent pairs for mixed space-time norms.

use crate::dynamics::params::validate_regime;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// An admissible space-time exponent pair `(r, p)` for the fractional
/// dispersive scaling `2 alpha / r + n / p = n / 2`.
///
/// `r = infinity` (the `sigma = 0` endpoint) is represented by `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissiblePair<T> {
    n: usize,
    alpha: T,
    r: Option<T>,
    p: T,
    endpoint_flag: bool,
}

impl<T: Real> AdmissiblePair<T> {
    /// Time exponent; `None` encodes `r = infinity`.
    pub fn r(&self) -> Option<T> {
        self.r
    }

    /// Space exponent `p`.
    pub fn p(&self) -> T {
        self.p
    }

    /// True when the pair coincides with the excluded endpoint
    /// `(2, (4n-2)/(2n-3))`.
    pub fn is_endpoint(&self) -> bool {
        self.endpoint_flag
    }

    /// `|2 alpha/r + n/p - n/2|`; zero for the `r = infinity` pair.
    pub fn scaling_identity_residual(&self) -> T {
        let two = T::from_f64_lit(2.0);
        let nf = T::from_f64_lit(self.n as f64);
        let time_term = match self.r {
            Some(r) => two * self.alpha / r,
            None => T::zero(),
        };
        (time_term + nf / self.p - nf / two).abs()
    }
}

impl<T: Real> std::fmt::Display for AdmissiblePair<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.r {
            Some(r) => write!(f, "(r, p) = ({}, {})", r.as_f64(), self.p.as_f64()),
            None => write!(f, "(r, p) = (inf, {})", self.p.as_f64()),
        }
    }
}

/// The admissible pair generated by the nonlinearity power:
/// `r = 4 (sigma+1) alpha / (n sigma)` and `p = 2 sigma + 2`, with
/// `sigma = 0` mapping to `(infinity, 2)`.
///
/// Inputs must lie in the well-posedness regime; the first violated
/// constraint is reported otherwise.
pub fn admissible_pair<T: Real>(n: usize, alpha: T, sigma: T) -> Result<AdmissiblePair<T>> {
    // gamma/beta are irrelevant here; pick values that satisfy their check.
    let report = validate_regime(n, alpha, sigma, T::one(), T::zero());
    if let Some(&c) = report.violations().first() {
        return Err(Error::RegimeViolation(c));
    }

    let two = T::from_f64_lit(2.0);
    if sigma == T::zero() {
        return Ok(AdmissiblePair {
            n,
            alpha,
            r: None,
            p: two,
            endpoint_flag: false,
        });
    }

    let nf = T::from_f64_lit(n as f64);
    let four = T::from_f64_lit(4.0);
    let r = four * (sigma + T::one()) * alpha / (nf * sigma);
    let p = two * sigma + two;

    let tol = T::from_f64_lit(1e-12);
    let excluded_p = (four * nf - two) / (two * nf - T::from_f64_lit(3.0));
    let endpoint_flag = (r - two).abs() <= tol && (p - excluded_p).abs() <= tol;

    Ok(AdmissiblePair {
        n,
        alpha,
        r: Some(r),
        p,
        endpoint_flag,
    })
}
