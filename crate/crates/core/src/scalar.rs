//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point element type usable by the autodiff engine and the models.
///
/// Implemented for `f32` and `f64`; matrix products dispatch to the blocked
/// kernels `ndarray` ships for both.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

/// Lossy conversion to `f64` for reporting and serialization.
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Numerically stable `log(1 + exp(t))`.
#[inline]
pub fn softplus<T: Real>(t: T) -> T {
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

/// Logistic function evaluated without overflow for large `|t|`.
#[inline]
pub fn sigmoid<T: Real>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

/// `log(sum(exp(xs)))` with the usual max shift.
pub fn log_sum_exp<T: Real>(xs: impl IntoIterator<Item = T> + Clone) -> T {
    let m = xs
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |a, b| a.max(b));
    if m == T::neg_infinity() {
        return m;
    }
    let s: T = xs.into_iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_at_zero_is_ln2() {
        assert!((softplus(0.0f64) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(0.0f32) - std::f32::consts::LN_2).abs() < 1e-7);
    }

    #[test]
    fn softplus_large_arguments_stay_finite() {
        assert_eq!(softplus(500.0f64), 500.0);
        assert!(softplus(-500.0f64) >= 0.0);
        assert!(softplus(-500.0f64) < 1e-200);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for &t in &[-30.0f64, -2.0, 0.0, 0.7, 41.0] {
            assert!((sigmoid(t) + sigmoid(-t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lse_matches_direct_sum() {
        let xs = [0.1f64, -2.0, 3.5];
        let direct = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs.iter().copied()) - direct).abs() < 1e-14);
        assert!((log_sum_exp([1000.0f64, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
