use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign, NumCast, ToPrimitive};

/// Floating-point scalar the whole library is generic over: `f32` or `f64`.
///
/// Bundles the arithmetic traits the measure/transport code needs with
/// [`rustfft::FftNum`] so one type parameter drives both the iteration
/// arithmetic and the FFT backend. The crate root exports `f64` aliases;
/// the accuracy targets of the default parameters assume `f64`.
pub trait Real:
    Float + FloatConst + NumAssign + rustfft::FftNum + Sum<Self> + Display + LowerExp + Debug
{
    /// Lossy cast from any primitive numeric type.
    ///
    /// Panics on values not representable at all (e.g. NaN from a failed
    /// conversion); plain rounding is fine.
    fn of<V: ToPrimitive>(v: V) -> Self {
        NumCast::from(v).expect("numeric cast failed")
    }

    /// Raw bit pattern, widened to `u64`. Used for exact (bitwise)
    /// deduplication of support points.
    fn bit_key(self) -> u64;
}

impl Real for f32 {
    fn bit_key(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Real for f64 {
    fn bit_key(self) -> u64 {
        self.to_bits()
    }
}

/// `2 * pi` as `T`.
pub(crate) fn two_pi<T: Real>() -> T {
    T::PI() + T::PI()
}
