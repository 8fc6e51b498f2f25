//! The focusing power nonlinearity `u -> |u|^(2 sigma) u`.

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};
use crate::spectral::{SpaceTag, SpectralField};

/// `|u|^(2 sigma)` for one sample, with `0^0 * 0` defined as `0` so the
/// map is total.  `sigma` values `0` and `1` avoid `powf` entirely.
#[inline]
fn modulus_factor<T: Real>(u: Cplx<T>, sigma: T) -> T {
    let m2 = u.re * u.re + u.im * u.im;
    if m2 == T::zero() {
        return T::zero();
    }
    if sigma == T::zero() {
        T::one()
    } else if sigma == T::one() {
        m2
    } else {
        m2.powf(sigma)
    }
}

/// Write `|u|^(2 sigma) u` pointwise into `out`.
pub fn nonlinearity_into<T: Real>(values: &[Cplx<T>], sigma: T, out: &mut [Cplx<T>]) {
    debug_assert_eq!(values.len(), out.len());
    if sigma == T::zero() {
        out.copy_from_slice(values);
        return;
    }
    for (o, &u) in out.iter_mut().zip(values) {
        let f = modulus_factor(u, sigma);
        *o = Cplx::new(u.re * f, u.im * f);
    }
}

/// The pointwise power nonlinearity of a physical-space field.
///
/// `sigma = 0` is the identity map (values copied verbatim).
pub fn nonlinearity<T: Real>(field: &SpectralField<T>, sigma: T) -> Result<SpectralField<T>> {
    if field.tag() != SpaceTag::Physical {
        return Err(Error::SpaceMismatch {
            expected: SpaceTag::Physical.name(),
            found: field.tag().name(),
        });
    }
    let mut out = SpectralField::zeros(*field.grid(), SpaceTag::Physical);
    nonlinearity_into(field.values(), sigma, out.values_mut());
    Ok(out)
}

/// In-place exact rotation `u <- u * exp(i |u|^(2 sigma) dt)`: the closed
/// form of the nonlinear subflow over one step, used by splitting schemes.
/// Preserves `|u|` pointwise by construction.
pub fn rotate_nonlinear_phase<T: Real>(values: &mut [Cplx<T>], sigma: T, dt: T) {
    for u in values.iter_mut() {
        let theta = modulus_factor(*u, sigma) * dt;
        if theta == T::zero() {
            continue;
        }
        let (s, c) = theta.sin_cos();
        let re = u.re * c - u.im * s;
        let im = u.re * s + u.im * c;
        u.re = re;
        u.im = im;
    }
}
