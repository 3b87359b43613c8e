//! Octuple-precision scalar (237-bit significand, about 71 significant
//! digits) backed by [`f256::f256`]. Much slower than [`DoubleDouble`], it is
//! meant for the few root solves whose conditioning exceeds double-double.
//! Formatting and serialization use the nearest `f64`.
//!
//! [`DoubleDouble`]: crate::DoubleDouble

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use f256::f256;
use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Default, PartialEq)]
pub struct Octuple(f256);

impl Octuple {
    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Self(f256::from(x))
    }

    /// Nearest `f64` (up to one extra rounding in the last bit).
    pub fn to_f64(self) -> f64 {
        let x = self.0;
        if x.is_nan() {
            return f64::NAN;
        }
        if x.is_infinite() {
            return if x.is_sign_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        let (sign, exp, (hi, lo)) = x.as_sign_exp_signif();
        let mag = hi as f64 * 2f64.powi(128) + lo as f64;
        let half = exp / 2;
        let v = mag * 2f64.powi(half) * 2f64.powi(exp - half);
        if sign == 1 {
            -v
        } else {
            v
        }
    }

    fn to_i128_checked(self) -> Option<i128> {
        let t = self.0.trunc();
        if !t.is_finite() {
            return None;
        }
        let (sign, exp, (hi, lo)) = t.as_sign_exp_signif();
        let mag: u128 = if exp >= 0 {
            if hi != 0 || exp >= 128 || lo.leading_zeros() < exp as u32 + 1 {
                return None;
            }
            lo << exp
        } else {
            let sh = (-exp) as u32;
            if sh >= 256 {
                0
            } else if sh >= 128 {
                hi >> (sh - 128)
            } else if hi >> sh != 0 {
                return None;
            } else if sh == 0 {
                lo
            } else {
                (lo >> sh) | (hi << (128 - sh))
            }
        };
        let mag = i128::try_from(mag).ok()?;
        Some(if sign == 1 { -mag } else { mag })
    }
}

impl fmt::Debug for Octuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Octuple({:e})", self.0)
    }
}

impl fmt::Display for Octuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&Octuple::to_f64(*self), f)
    }
}

impl fmt::LowerExp for Octuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&Octuple::to_f64(*self), f)
    }
}

impl Serialize for Octuple {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(Octuple::to_f64(*self))
    }
}

impl<'de> Deserialize<'de> for Octuple {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Self::from_f64)
    }
}

impl PartialOrd for Octuple {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl Neg for Octuple {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Octuple {
            type Output = Self;
            #[inline]
            fn $m(self, rhs: Self) -> Self {
                Self(self.0.$m(rhs.0))
            }
        }
    };
}
binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);
binop!(Rem, rem);

impl Zero for Octuple {
    fn zero() -> Self {
        Self(f256::ZERO)
    }
    fn is_zero(&self) -> bool {
        self.0 == f256::ZERO
    }
}

impl One for Octuple {
    fn one() -> Self {
        Self(f256::ONE)
    }
}

impl Num for Octuple {
    type FromStrRadixErr = num_traits::ParseFloatError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        if radix == 10 {
            s.parse::<f256>().map(Self).map_err(|_| num_traits::ParseFloatError {
                kind: num_traits::FloatErrorKind::Invalid,
            })
        } else {
            f64::from_str_radix(s, radix).map(Self::from_f64)
        }
    }
}

impl ToPrimitive for Octuple {
    fn to_i64(&self) -> Option<i64> {
        self.to_i128_checked().and_then(|n| i64::try_from(n).ok())
    }
    fn to_u64(&self) -> Option<u64> {
        self.to_i128_checked().and_then(|n| u64::try_from(n).ok())
    }
    fn to_i128(&self) -> Option<i128> {
        self.to_i128_checked()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(Octuple::to_f64(*self))
    }
}

impl FromPrimitive for Octuple {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Self(f256::from(n as i128)))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Self(f256::from(n as u128)))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Self::from_f64(n))
    }
}

impl NumCast for Octuple {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        match n.to_i128() {
            Some(i) if n.to_f64().is_some_and(|x| x == x.trunc()) => Some(Self(f256::from(i))),
            _ => n.to_f64().map(Self::from_f64),
        }
    }
}

impl FloatConst for Octuple {
    fn E() -> Self {
        Self(::f256::consts::E)
    }
    fn FRAC_1_PI() -> Self {
        Self(::f256::consts::FRAC_1_PI)
    }
    fn FRAC_1_SQRT_2() -> Self {
        Self(::f256::consts::FRAC_1_SQRT_2)
    }
    fn FRAC_2_PI() -> Self {
        Self(::f256::consts::FRAC_2_PI)
    }
    fn FRAC_2_SQRT_PI() -> Self {
        Self(::f256::consts::FRAC_2_SQRT_PI)
    }
    fn FRAC_PI_2() -> Self {
        Self(::f256::consts::FRAC_PI_2)
    }
    fn FRAC_PI_3() -> Self {
        Self(::f256::consts::FRAC_PI_3)
    }
    fn FRAC_PI_4() -> Self {
        Self(::f256::consts::FRAC_PI_4)
    }
    fn FRAC_PI_6() -> Self {
        Self(::f256::consts::FRAC_PI_6)
    }
    fn FRAC_PI_8() -> Self {
        Self(::f256::consts::FRAC_PI_8)
    }
    fn LN_10() -> Self {
        Self(::f256::consts::LN_10)
    }
    fn LN_2() -> Self {
        Self(::f256::consts::LN_2)
    }
    fn LOG10_E() -> Self {
        Self(::f256::consts::LOG10_E)
    }
    fn LOG2_E() -> Self {
        Self(::f256::consts::LOG2_E)
    }
    fn PI() -> Self {
        Self(::f256::consts::PI)
    }
    fn SQRT_2() -> Self {
        Self(::f256::consts::SQRT_2)
    }
    fn TAU() -> Self {
        Self(::f256::consts::TAU)
    }
    fn LOG10_2() -> Self {
        Self(::f256::consts::LOG10_2)
    }
    fn LOG2_10() -> Self {
        Self(::f256::consts::LOG2_10)
    }
}

impl Float for Octuple {
    fn nan() -> Self {
        Self(f256::NAN)
    }
    fn infinity() -> Self {
        Self(f256::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self(f256::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self(f256::NEG_ZERO)
    }
    fn min_value() -> Self {
        Self(f256::MIN)
    }
    fn min_positive_value() -> Self {
        Self(f256::MIN_POSITIVE)
    }
    fn epsilon() -> Self {
        Self(f256::EPSILON)
    }
    fn max_value() -> Self {
        Self(f256::MAX)
    }
    fn is_nan(self) -> bool {
        self.0.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.0.is_finite()
    }
    fn is_normal(self) -> bool {
        self.0.is_normal()
    }
    fn classify(self) -> FpCategory {
        if self.0.is_nan() {
            FpCategory::Nan
        } else if self.0.is_infinite() {
            FpCategory::Infinite
        } else if self.0 == f256::ZERO {
            FpCategory::Zero
        } else if self.0.is_subnormal() {
            FpCategory::Subnormal
        } else {
            FpCategory::Normal
        }
    }
    fn floor(self) -> Self {
        Self(self.0.floor())
    }
    fn ceil(self) -> Self {
        Self(self.0.ceil())
    }
    fn round(self) -> Self {
        Self(self.0.round())
    }
    fn trunc(self) -> Self {
        Self(self.0.trunc())
    }
    fn fract(self) -> Self {
        Self(self.0.fract())
    }
    fn abs(self) -> Self {
        Self(self.0.abs())
    }
    fn signum(self) -> Self {
        Self(self.0.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.0.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.0.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        Self(self.0.mul_add(a.0, b.0))
    }
    fn recip(self) -> Self {
        Self(self.0.recip())
    }
    fn powi(self, n: i32) -> Self {
        Self(self.0.powi(n))
    }
    fn powf(self, n: Self) -> Self {
        Self(self.0.powf(&n.0))
    }
    fn sqrt(self) -> Self {
        Self(self.0.sqrt())
    }
    fn exp(self) -> Self {
        Self(self.0.exp())
    }
    fn exp2(self) -> Self {
        Self(self.0.exp2())
    }
    fn ln(self) -> Self {
        Self(self.0.ln())
    }
    fn log(self, base: Self) -> Self {
        Self(self.0.log(&base.0))
    }
    fn log2(self) -> Self {
        Self(self.0.log2())
    }
    fn log10(self) -> Self {
        Self(self.0.log10())
    }
    fn max(self, other: Self) -> Self {
        if self.is_nan() || other > self {
            other
        } else {
            self
        }
    }
    fn min(self, other: Self) -> Self {
        if self.is_nan() || other < self {
            other
        } else {
            self
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            Self::zero()
        }
    }
    fn cbrt(self) -> Self {
        Self(self.0.cbrt())
    }
    fn hypot(self, other: Self) -> Self {
        Self(self.0.hypot(other.0))
    }
    fn sin(self) -> Self {
        Self(self.0.sin())
    }
    fn cos(self) -> Self {
        Self(self.0.cos())
    }
    fn tan(self) -> Self {
        Self(self.0.tan())
    }
    fn asin(self) -> Self {
        Self(self.0.asin())
    }
    fn acos(self) -> Self {
        Self(self.0.acos())
    }
    fn atan(self) -> Self {
        Self(self.0.atan())
    }
    fn atan2(self, other: Self) -> Self {
        Self(self.0.atan2(&other.0))
    }
    fn sin_cos(self) -> (Self, Self) {
        let (s, c) = self.0.sin_cos();
        (Self(s), Self(c))
    }
    fn exp_m1(self) -> Self {
        Self(self.0.exp_m1())
    }
    fn ln_1p(self) -> Self {
        Self(self.0.ln_1p())
    }
    fn sinh(self) -> Self {
        let e = self.exp_m1();
        (e + e / (e + Self::one())) / Self::from_f64(2.0)
    }
    fn cosh(self) -> Self {
        let e = self.abs().exp();
        (e + e.recip()) / Self::from_f64(2.0)
    }
    fn tanh(self) -> Self {
        let e = (self * Self::from_f64(2.0)).exp_m1();
        e / (e + Self::from_f64(2.0))
    }
    fn asinh(self) -> Self {
        let a = self.abs();
        let r = (a + (a * a + Self::one()).sqrt()).ln();
        if self.is_sign_negative() {
            -r
        } else {
            r
        }
    }
    fn acosh(self) -> Self {
        (self + (self * self - Self::one()).sqrt()).ln()
    }
    fn atanh(self) -> Self {
        ((Self::one() + self) / (Self::one() - self)).ln() / Self::from_f64(2.0)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.to_f64().integer_decode()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type O = Octuple;

    fn o(x: f64) -> O {
        O::from_f64(x)
    }

    #[test]
    fn carries_about_seventy_digits() {
        let third = o(1.0) / o(3.0);
        assert!((third * o(3.0) - o(1.0)).abs() < o(1e-70));
        let x = o(2.0) / o(3.0);
        assert!((x.exp().ln() - x).abs() < o(1e-68));
        let (s, c) = x.sin_cos();
        assert!((s.atan2(c) - x).abs() < o(1e-68));
        assert!((O::PI().sin()).abs() < o(1e-70));
    }

    #[test]
    fn conversions_round_trip() {
        for x in [3.5, -0.1, 1e-300, 1e300, 0.0, 2.0f64.powi(-1074)] {
            assert_eq!(o(x).to_f64(), x);
        }
        assert_eq!((o(1.0) / o(3.0)).to_f64(), 1.0 / 3.0);
        assert_eq!(o(-7.9).to_i64(), Some(-7));
        assert_eq!(o(12345.99).to_u64(), Some(12345));
        assert_eq!(o(2f64.powi(100)).to_i128(), Some(1i128 << 100));
        assert_eq!(o(1e40).to_i128(), None);
        assert_eq!(<O as NumCast>::from(7usize).unwrap(), o(7.0));
        assert_eq!(format!("{:.2e}", o(1234.5)), "1.23e3");
        assert!(o(f64::NAN).to_f64().is_nan());
    }
}
