use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type the model is evaluated in: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in every Scalar")
}

/// `1 - exp(-x)` without cancellation for small `x`.
#[inline]
pub fn one_minus_exp_neg<T: Scalar>(x: T) -> T {
    -(-x).exp_m1()
}

/// `(1 - p)^k` evaluated as `exp(k ln(1 - p))`, valid for real `k`.
#[inline]
pub fn pow_complement<T: Scalar>(p: T, k: T) -> T {
    if p >= T::one() {
        return if k > T::zero() { T::zero() } else { T::one() };
    }
    (k * (-p).ln_1p()).exp()
}

#[inline]
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_argument_is_accurate() {
        let x = 1e-12_f64;
        let naive = 1.0 - (-x).exp();
        assert!((one_minus_exp_neg(x) - x).abs() < 1e-24);
        assert!((naive - x).abs() > 1e-20);
    }

    #[test]
    fn complement_power_edges() {
        assert_eq!(pow_complement(1.0_f64, 3.0), 0.0);
        assert_eq!(pow_complement(1.0_f64, 0.0), 1.0);
        assert!((pow_complement(0.5_f64, 2.0) - 0.25).abs() < 1e-15);
        assert!((pow_complement(0.25_f32, 2.0) - 0.5625).abs() < 1e-6);
    }
}
