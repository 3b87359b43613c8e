//! Double-double scalar: an unevaluated sum `hi + lo` of two `f64` values
//! carrying about 32 significant digits.
//!
//! Arithmetic, `sqrt`, `exp` and `ln` come from [`qd::Quad`]. The remaining
//! elementary functions are built on top of those with one Newton correction
//! from the `f64` estimate or with a short Taylor series after argument
//! reduction. Formatting and serialization use the nearest `f64`.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use qd::Quad;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, PartialEq)]
pub struct DoubleDouble(Quad);

const EPS: f64 = 4.930380657631324e-32; // 2^-104

#[inline]
fn settle(q: Quad) -> DoubleDouble {
    if q.0.is_finite() {
        DoubleDouble(q)
    } else {
        DoubleDouble(Quad(q.0, 0.0))
    }
}

#[inline]
fn settle_or(q: Quad, fallback: impl FnOnce() -> f64) -> DoubleDouble {
    if q.0.is_finite() {
        DoubleDouble(q)
    } else {
        DoubleDouble::from_f64(fallback())
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl DoubleDouble {
    pub const ZERO: Self = Self(Quad(0.0, 0.0));
    pub const ONE: Self = Self(Quad(1.0, 0.0));
    pub const PI: Self = Self(Quad(std::f64::consts::PI, 1.2246467991473532e-16));
    pub const FRAC_PI_2: Self = Self(Quad(std::f64::consts::FRAC_PI_2, 6.123233995736766e-17));
    pub const LN_2: Self = Self(Quad(std::f64::consts::LN_2, 2.3190468138462996e-17));

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Self(Quad(x, 0.0))
    }

    /// Builds `hi + lo`, renormalizing the pair.
    #[inline]
    pub fn from_parts(hi: f64, lo: f64) -> Self {
        let (s, e) = two_sum(hi, lo);
        settle(Quad(s, e))
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.0 .0
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.0 .1
    }

    #[inline]
    fn scale_pow2(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Self(Quad(self.hi() * s, self.lo() * s))
    }

    fn from_i128(n: i128) -> Self {
        let hi = n as f64;
        let rest = n - hi as i128;
        Self::from_parts(hi, rest as f64)
    }

    fn round_with(self, g: impl Fn(f64) -> f64) -> Self {
        let h = g(self.hi());
        if h == self.hi() {
            Self::from_parts(h, g(self.lo()))
        } else {
            Self::from_f64(h)
        }
    }

    /// `sin` and `cos` of `|r| <= pi/4` by Taylor series.
    fn sin_cos_reduced(r: Self) -> (Self, Self) {
        let r2 = r * r;
        let mut term = r;
        let mut sin = r;
        let mut k = 1.0;
        while term.hi().abs() > EPS * 1e-2 {
            term = -(term * r2) / Self::from_f64((k + 1.0) * (k + 2.0));
            sin = sin + term;
            k += 2.0;
        }
        let mut term = Self::ONE;
        let mut cos = Self::ONE;
        let mut k = 0.0;
        while term.hi().abs() > EPS * 1e-2 {
            term = -(term * r2) / Self::from_f64((k + 1.0) * (k + 2.0));
            cos = cos + term;
            k += 2.0;
        }
        (sin, cos)
    }
}

impl Default for DoubleDouble {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleDouble({:e} + {:e})", self.hi(), self.lo())
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.hi(), f)
    }
}

impl fmt::LowerExp for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&self.hi(), f)
    }
}

impl Serialize for DoubleDouble {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.hi())
    }
}

impl<'de> Deserialize<'de> for DoubleDouble {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Self::from_f64)
    }
}

impl PartialOrd for DoubleDouble {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(other.0)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        settle_or(self.0.add_accurate(rhs.0), || self.hi() + rhs.hi())
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        settle_or(self.0.sub_accurate(rhs.0), || self.hi() - rhs.hi())
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        settle_or(self.0 * rhs.0, || self.hi() * rhs.hi())
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        if rhs.hi() == 0.0 || !rhs.hi().is_finite() || !self.hi().is_finite() {
            return Self::from_f64(self.hi() / rhs.hi());
        }
        settle(self.0 / rhs.0)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;
    #[inline]
    fn rem(self, rhs: Self) -> Self {
        self - (self / rhs).trunc() * rhs
    }
}

impl Zero for DoubleDouble {
    #[inline]
    fn zero() -> Self {
        Self::ZERO
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.hi() == 0.0
    }
}

impl One for DoubleDouble {
    #[inline]
    fn one() -> Self {
        Self::ONE
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = num_traits::ParseFloatError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::from_f64)
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        self.to_i128().and_then(|n| i64::try_from(n).ok())
    }
    fn to_u64(&self) -> Option<u64> {
        self.to_i128().and_then(|n| u64::try_from(n).ok())
    }
    fn to_i128(&self) -> Option<i128> {
        let t = self.trunc();
        if !t.hi().is_finite() || t.hi().abs() >= 1.7e38 {
            return None;
        }
        Some(t.hi() as i128 + t.lo() as i128)
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi())
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Self::from_i128(n as i128))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Self::from_i128(n as i128))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Self::from_f64(n))
    }
}

impl NumCast for DoubleDouble {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        match n.to_i128() {
            Some(i) if n.to_f64().is_some_and(|x| x == x.trunc()) => Some(Self::from_i128(i)),
            _ => n.to_f64().map(Self::from_f64),
        }
    }
}

impl FloatConst for DoubleDouble {
    fn E() -> Self {
        Self(Quad(std::f64::consts::E, 1.4456468917292502e-16))
    }
    fn FRAC_1_PI() -> Self {
        Self::ONE / Self::PI
    }
    fn FRAC_1_SQRT_2() -> Self {
        Self::SQRT_2() / Self::from_f64(2.0)
    }
    fn FRAC_2_PI() -> Self {
        Self::from_f64(2.0) / Self::PI
    }
    fn FRAC_2_SQRT_PI() -> Self {
        Self::from_f64(2.0) / Self::PI.sqrt()
    }
    fn FRAC_PI_2() -> Self {
        Self::FRAC_PI_2
    }
    fn FRAC_PI_3() -> Self {
        Self::PI / Self::from_f64(3.0)
    }
    fn FRAC_PI_4() -> Self {
        Self::FRAC_PI_2.scale_pow2(-1)
    }
    fn FRAC_PI_6() -> Self {
        Self::PI / Self::from_f64(6.0)
    }
    fn FRAC_PI_8() -> Self {
        Self::FRAC_PI_2.scale_pow2(-2)
    }
    fn LN_10() -> Self {
        Self(Quad::LN_10)
    }
    fn LN_2() -> Self {
        Self::LN_2
    }
    fn LOG10_E() -> Self {
        Self(Quad::FRAC_1_LN_10)
    }
    fn LOG2_E() -> Self {
        Self(Quad::FRAC_1_LN_2)
    }
    fn PI() -> Self {
        Self::PI
    }
    fn SQRT_2() -> Self {
        Self::from_f64(2.0).sqrt()
    }
    fn TAU() -> Self {
        Self::PI.scale_pow2(1)
    }
    fn LOG10_2() -> Self {
        Self::LN_2 / Self(Quad::LN_10)
    }
    fn LOG2_10() -> Self {
        Self(Quad::LN_10) / Self::LN_2
    }
}

impl Float for DoubleDouble {
    fn nan() -> Self {
        Self(Quad::NAN)
    }
    fn infinity() -> Self {
        Self(Quad::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self(Quad::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self::from_f64(-0.0)
    }
    fn min_value() -> Self {
        Self(Quad::MIN)
    }
    fn min_positive_value() -> Self {
        Self(Quad::MIN_POSITIVE)
    }
    fn epsilon() -> Self {
        Self::from_f64(EPS)
    }
    fn max_value() -> Self {
        Self(Quad::MAX)
    }
    fn is_nan(self) -> bool {
        self.0.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi().is_infinite()
    }
    fn is_finite(self) -> bool {
        self.0.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi().is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi().classify()
    }
    fn floor(self) -> Self {
        self.round_with(f64::floor)
    }
    fn ceil(self) -> Self {
        self.round_with(f64::ceil)
    }
    fn round(self) -> Self {
        let f = self.floor();
        let diff = self - f;
        let half = Self::from_f64(0.5);
        if diff > half || (diff == half && self.hi() > 0.0) {
            f + Self::ONE
        } else {
            f
        }
    }
    fn trunc(self) -> Self {
        if self.hi() >= 0.0 {
            self.floor()
        } else {
            self.ceil()
        }
    }
    fn fract(self) -> Self {
        self - self.trunc()
    }
    fn abs(self) -> Self {
        if self.hi().is_sign_negative() {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::from_f64(self.hi().signum())
    }
    fn is_sign_positive(self) -> bool {
        self.hi().is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi().is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Self::ONE / self
    }
    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }
    fn powf(self, n: Self) -> Self {
        if n.hi() == n.hi().trunc() && n.lo() == 0.0 && n.hi().abs() < 1024.0 {
            return self.powi(n.hi() as i32);
        }
        if self.hi() == 0.0 {
            return if n.hi() > 0.0 { Self::ZERO } else { Self::infinity() };
        }
        (n * self.ln()).exp()
    }
    fn sqrt(self) -> Self {
        if self.hi().is_infinite() && self.hi() > 0.0 {
            return self;
        }
        settle(self.0.sqrt())
    }
    fn exp(self) -> Self {
        if self.is_nan() {
            return self;
        }
        settle(self.0.exp())
    }
    fn exp2(self) -> Self {
        (self * Self::LN_2).exp()
    }
    fn ln(self) -> Self {
        if self.is_nan() || (self.hi().is_infinite() && self.hi() > 0.0) {
            return self;
        }
        settle(self.0.ln())
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        self.ln() / Self::LN_2
    }
    fn log10(self) -> Self {
        self.ln() / Self(Quad::LN_10)
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
            Self::ZERO
        }
    }
    fn cbrt(self) -> Self {
        let y = self.hi().cbrt();
        if y == 0.0 || !y.is_finite() {
            return Self::from_f64(y);
        }
        let y = Self::from_f64(y);
        y - (y * y * y - self) / (Self::from_f64(3.0) * y * y)
    }
    fn hypot(self, other: Self) -> Self {
        let (a, b) = (self.abs(), other.abs());
        let m = a.hi().max(b.hi());
        if m == 0.0 || !m.is_finite() {
            return Self::from_f64(a.hi().hypot(b.hi()));
        }
        let k = m.log2().floor() as i32;
        let (a, b) = (a.scale_pow2(-k), b.scale_pow2(-k));
        (a * a + b * b).sqrt().scale_pow2(k)
    }
    fn sin(self) -> Self {
        self.sin_cos().0
    }
    fn cos(self) -> Self {
        self.sin_cos().1
    }
    fn tan(self) -> Self {
        let (s, c) = self.sin_cos();
        s / c
    }
    fn asin(self) -> Self {
        self.atan2((Self::ONE - self * self).sqrt())
    }
    fn acos(self) -> Self {
        (Self::ONE - self * self).sqrt().atan2(self)
    }
    fn atan(self) -> Self {
        self.atan2(Self::ONE)
    }
    fn atan2(self, other: Self) -> Self {
        let (y, x) = (self, other);
        let t0 = y.hi().atan2(x.hi());
        if !y.is_finite() || !x.is_finite() || (y.hi() == 0.0 && x.hi() == 0.0) {
            return Self::from_f64(t0);
        }
        let t = Self::from_f64(t0);
        let (s, c) = t.sin_cos();
        t + (y * c - x * s) / (x * c + y * s)
    }
    fn sin_cos(self) -> (Self, Self) {
        if !self.is_finite() {
            return (Self::nan(), Self::nan());
        }
        let k = (self / Self::FRAC_PI_2).round();
        let r = self - k * Self::FRAC_PI_2;
        let (s, c) = Self::sin_cos_reduced(r);
        match (k.hi() as i64 + k.lo() as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
    fn exp_m1(self) -> Self {
        if self.hi().abs() >= 0.5 {
            return self.exp() - Self::ONE;
        }
        let mut term = self;
        let mut sum = self;
        let mut k = 1.0;
        while term.hi().abs() > EPS * 1e-2 * sum.hi().abs() {
            k += 1.0;
            term = term * self / Self::from_f64(k);
            sum = sum + term;
        }
        sum
    }
    fn ln_1p(self) -> Self {
        if self.hi().abs() >= 0.5 || self.is_nan() {
            return (Self::ONE + self).ln();
        }
        let z = self / (Self::from_f64(2.0) + self);
        let z2 = z * z;
        let mut power = z;
        let mut sum = z;
        let mut k = 1.0;
        while power.hi().abs() > EPS * 1e-2 * sum.hi().abs() {
            power = power * z2;
            k += 2.0;
            sum = sum + power / Self::from_f64(k);
        }
        sum.scale_pow2(1)
    }
    fn sinh(self) -> Self {
        let e = self.exp_m1();
        (e + e / (e + Self::ONE)).scale_pow2(-1)
    }
    fn cosh(self) -> Self {
        let e = self.abs().exp();
        (e + e.recip()).scale_pow2(-1)
    }
    fn tanh(self) -> Self {
        let e = (self.scale_pow2(1)).exp_m1();
        e / (e + Self::from_f64(2.0))
    }
    fn asinh(self) -> Self {
        let a = self.abs();
        let r = (a + (a * a + Self::ONE).sqrt()).ln();
        if self.hi() < 0.0 {
            -r
        } else {
            r
        }
    }
    fn acosh(self) -> Self {
        (self + (self * self - Self::ONE).sqrt()).ln()
    }
    fn atanh(self) -> Self {
        ((Self::ONE + self) / (Self::ONE - self)).ln().scale_pow2(-1)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi().integer_decode()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type D = DoubleDouble;

    fn d(x: f64) -> D {
        D::from_f64(x)
    }

    fn close(a: D, b: D, tol: f64) -> bool {
        ((a - b) / b).abs().hi() < tol
    }

    #[test]
    fn division_keeps_low_word() {
        let x = d(2.0) / d(3.0);
        assert!((x * d(3.0) - d(2.0)).abs().hi() < 1e-31);
        assert!(x.lo() != 0.0);
    }

    #[test]
    fn elementary_identities_hold_to_double_double_precision() {
        let x = d(2.0) / d(3.0);
        assert!(close(x.exp().ln(), x, 1e-30));
        assert!(close(x.sqrt() * x.sqrt(), x, 1e-30));
        assert!(close(x.cbrt().powi(3), x, 1e-30));
        let (s, c) = x.sin_cos();
        assert!((s * s + c * c - D::ONE).abs().hi() < 1e-31);
        assert!(close(s.atan2(c), x, 1e-30));
        assert!(close(x.tan().atan(), x, 1e-30));
        assert!(close(d(-3.0).atan2(d(-4.0)).tan(), d(0.75), 1e-30));
        assert!(close(x.powf(d(2.5)), x.powi(5).sqrt(), 1e-30));
        assert!(close(d(3.0).hypot(d(4.0)), d(5.0), 1e-31));
        let s = 2f64.powi(600);
        assert!(close(d(3.0 * s).hypot(d(4.0 * s)), d(5.0 * s), 1e-31));
        let tiny = d(1e-20) / d(3.0);
        assert!(close(tiny.ln_1p(), tiny - tiny * tiny / d(2.0), 1e-30));
        assert!(close(tiny.exp_m1(), tiny + tiny * tiny / d(2.0), 1e-30));
    }

    #[test]
    fn pi_matches_reference_digits() {
        let s = D::PI.sin();
        assert!(s.abs().hi() < 1e-31);
        let (s, c) = (d(100.0) * D::PI + d(0.25)).sin_cos();
        assert!(close(s, d(0.25).sin(), 1e-28) && close(c, d(0.25).cos(), 1e-28));
    }

    #[test]
    fn rounding_uses_the_low_word() {
        let just_below = D::from_parts(3.0, -1e-20);
        assert_eq!(just_below.floor(), d(2.0));
        assert_eq!(just_below.ceil(), d(3.0));
        assert_eq!(just_below.round(), d(3.0));
        assert_eq!(D::from_parts(2.5, 1e-20).round(), d(3.0));
        assert_eq!(D::from_parts(2.5, -1e-20).round(), d(2.0));
        assert_eq!(d(-2.5).trunc(), d(-2.0));
        assert_eq!(just_below.to_i64(), Some(2));
    }

    #[test]
    fn non_finite_values_stay_consistent() {
        let inf = D::infinity();
        assert!((inf + D::ONE).is_infinite());
        assert!((d(1e300) * d(1e300)).is_infinite());
        assert!((D::ONE / D::ZERO).is_infinite());
        assert!(d(-1.0).sqrt().is_nan());
        assert_eq!(D::ZERO.ln(), D::neg_infinity());
        assert_eq!(d(-800.0).exp(), D::ZERO);
        assert!(inf.sqrt().is_infinite());
        assert!(d(1.0).max(D::nan()) == d(1.0) && D::nan().min(d(1.0)) == d(1.0));
    }

    #[test]
    fn conversions_are_exact_for_integers() {
        let big = (1u64 << 60) + 1;
        let x = <D as FromPrimitive>::from_u64(big).unwrap();
        assert_eq!(x.to_u64(), Some(big));
        assert_eq!(<D as NumCast>::from(0.1f64).unwrap().hi(), 0.1);
        assert_eq!(<D as NumCast>::from(7usize).unwrap(), d(7.0));
        assert_eq!(format!("{:.3e}", d(1234.5)), "1.234e3");
        let json = serde_json::to_string(&(d(1.0) / d(3.0))).unwrap();
        assert_eq!(serde_json::from_str::<D>(&json).unwrap().hi(), 1.0 / 3.0);
    }
}
