//! Scalar abstraction for all field arithmetic.
//!
//! Every numerical module in this crate is generic over a [`Real`] scalar so
//! the same code drives `f32` and `f64` runs.  The verification suites use
//! `f64` throughout (their tolerances sit near 1e-12); `f32` remains useful
//! for quick exploratory runs.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftNum;

/// Floating point scalar usable by every module of this crate.
///
/// Combines the transform requirements (`FftNum`), ordinary float math
/// (`Float`, `FloatConst`), in-place arithmetic, and conversions.  A single
/// extra method supplies standard normal samples without leaking the
/// distribution type into the trait bounds of callers.
pub trait Real:
    Float + FloatConst + FftNum + NumAssign + FromPrimitive + ToPrimitive + std::iter::Sum<Self>
{
    /// Draw one standard normal sample from `rng`.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossless-ish conversion from `f64` for constants in generic code.
    ///
    /// Panics only if the target type cannot represent any finite `f64`,
    /// which does not happen for the supported scalars.
    fn from_f64_lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal must convert")
    }

    /// Conversion to `f64` for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl Real for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Real for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

/// Complex number over the crate scalar.
pub type Cplx<T> = Complex<T>;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn moments<T: Real>(n: usize) -> (f64, f64) {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = T::standard_normal(&mut rng).as_f64();
            sum += x;
            sumsq += x * x;
        }
        (sum / n as f64, sumsq / n as f64)
    }

    #[test]
    fn standard_normal_has_unit_variance_f64() {
        let (mean, msq) = moments::<f64>(200_000);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((msq - 1.0).abs() < 0.02, "second moment {msq}");
    }

    #[test]
    fn standard_normal_has_unit_variance_f32() {
        let (mean, msq) = moments::<f32>(200_000);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((msq - 1.0).abs() < 0.02, "second moment {msq}");
    }

    #[test]
    fn f64_literal_roundtrip() {
        assert_eq!(f64::from_f64_lit(0.125), 0.125);
        assert_eq!(f32::from_f64_lit(0.125), 0.125f32);
    }
}
