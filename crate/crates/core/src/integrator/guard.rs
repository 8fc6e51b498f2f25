//! Blow-up detection: the numerical stand-in for the stopping-time
//! alternative of the continuous theory.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Configuration of the mass guard.  The guard trips exactly when the
/// discrete mass exceeds the threshold (or stops being finite); the
/// consecutive-growth limit only annotates whether the trip followed a
/// sustained growth streak rather than a single spike.
#[derive(Debug, Clone, Copy)]
pub struct BlowupGuard<T> {
    /// Absolute mass threshold; `None` means `1e6 x` the initial mass
    /// (falling back to `1e6` when the initial state is zero).
    pub mass_threshold: Option<T>,
    /// Streak length labeled "sustained growth" in the blow-up report.
    pub consecutive_growth_limit: usize,
}

impl<T: Real> Default for BlowupGuard<T> {
    fn default() -> Self {
        Self {
            mass_threshold: None,
            consecutive_growth_limit: 10,
        }
    }
}

impl<T: Real> BlowupGuard<T> {
    /// Resolve the threshold against the initial mass and start tracking.
    pub(crate) fn arm(&self, initial_mass: T) -> ArmedGuard<T> {
        let threshold = self.mass_threshold.unwrap_or_else(|| {
            let factor = T::from_f64_lit(1e6);
            if initial_mass > T::zero() {
                factor * initial_mass
            } else {
                factor
            }
        });
        ArmedGuard {
            threshold,
            limit: self.consecutive_growth_limit,
            streak: 0,
            prev_mass: initial_mass,
        }
    }
}

pub(crate) struct ArmedGuard<T> {
    threshold: T,
    limit: usize,
    streak: usize,
    prev_mass: T,
}

impl<T: Real> ArmedGuard<T> {
    #[cfg(test)]
    pub(crate) fn threshold(&self) -> T {
        self.threshold
    }

    #[cfg(test)]
    pub(crate) fn streak(&self) -> usize {
        self.streak
    }

    /// True when the current growth streak reached the annotation limit.
    pub(crate) fn sustained(&self) -> bool {
        self.streak >= self.limit
    }

    /// Update with the mass at time `t`; errors when the guard trips.
    pub(crate) fn check(&mut self, t: T, mass: T) -> Result<()> {
        if mass > self.prev_mass {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.prev_mass = mass;
        if !mass.is_finite() || mass > self.threshold {
            return Err(Error::BlowupDetected {
                t_estimate: t.as_f64(),
                mass: mass.as_f64(),
                threshold: self.threshold.as_f64(),
                consecutive_growth_steps: self.streak,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_threshold_is_a_million_times_initial_mass() {
        let guard: BlowupGuard<f64> = BlowupGuard::default();
        let armed = guard.arm(2.5);
        assert_eq!(armed.threshold(), 2.5e6);
        let armed = guard.arm(0.0);
        assert_eq!(armed.threshold(), 1e6);
    }

    #[test]
    fn trips_on_threshold_and_reports_the_streak() {
        let guard = BlowupGuard {
            mass_threshold: Some(10.0),
            consecutive_growth_limit: 2,
        };
        let mut armed = guard.arm(1.0);
        assert!(armed.check(0.1, 2.0).is_ok());
        assert!(armed.check(0.2, 4.0).is_ok());
        assert!(armed.sustained());
        let err = armed.check(0.3, 11.0).unwrap_err();
        match err {
            Error::BlowupDetected {
                t_estimate,
                mass,
                threshold,
                consecutive_growth_steps,
            } => {
                assert_eq!(t_estimate, 0.3);
                assert_eq!(mass, 11.0);
                assert_eq!(threshold, 10.0);
                assert_eq!(consecutive_growth_steps, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decay_resets_the_streak_and_never_trips() {
        let guard = BlowupGuard {
            mass_threshold: Some(100.0),
            consecutive_growth_limit: 1,
        };
        let mut armed = guard.arm(50.0);
        assert!(armed.check(0.1, 60.0).is_ok());
        assert!(armed.check(0.2, 40.0).is_ok());
        assert_eq!(armed.streak(), 0);
    }

    #[test]
    fn non_finite_mass_trips_immediately() {
        let guard = BlowupGuard {
            mass_threshold: Some(1e12),
            consecutive_growth_limit: 5,
        };
        let mut armed = guard.arm(1.0);
        assert!(armed.check(0.1, f64::NAN).is_err());
    }
}
