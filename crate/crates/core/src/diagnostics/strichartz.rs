//! Mixed space-time norms `L^r(0,T; L^p)` over trajectory snapshots.

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::scalar::Real;
use crate::spectral::Compensated;

/// Evaluate `||u||_{L^r(t_first, t_last; L^p)}` from the trajectory's
/// snapshots: the spatial norm per snapshot, then an `r`-th power
/// trapezoid rule over the (possibly nonuniform) snapshot times.
/// `r = None` is the sup-in-time norm (the `sigma = 0` admissible pair).
///
/// Refuses to quadrature fewer than 8 snapshots; schedule finer ones
/// instead of trusting a coarse integral.
pub fn strichartz_norm<T: Real>(traj: &Trajectory<T>, r: Option<T>, p: T) -> Result<T> {
    let snaps = traj.snapshots();
    if snaps.len() < 8 {
        return Err(Error::TooFewSnapshots {
            have: snaps.len(),
            need: 8,
        });
    }
    let spatial: Vec<T> = snaps
        .iter()
        .map(|(_, u)| u.lp_norm(p))
        .collect::<Result<_>>()?;
    match r {
        None => Ok(spatial.iter().fold(T::zero(), |acc, &x| acc.max(x))),
        Some(rv) => {
            if !(rv.is_finite() && rv >= T::one()) {
                return Err(Error::BadLpExponent(rv.as_f64()));
            }
            let half = T::from_f64_lit(0.5);
            let mut integral = Compensated::new();
            for (w, phi) in snaps.windows(2).zip(spatial.windows(2)) {
                let dt = w[1].0 - w[0].0;
                integral.add(dt * half * (phi[0].powf(rv) + phi[1].powf(rv)));
            }
            Ok(integral.value().powf(T::one() / rv))
        }
    }
}
