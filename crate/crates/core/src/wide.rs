//! Double-double floating point: an unevaluated sum `hi + lo` with about 106
//! bits of significand, used as the reference precision for finite
//! differences.
//!
//! Arithmetic, `sqrt`, `cbrt`, `hypot`, `exp`, `ln`, `powf` and `powi` are
//! accurate to roughly 1e-29 relative. Trigonometric and hyperbolic functions
//! are only evaluated on the high word.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, Default)]
pub struct Wide {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Wide {
    pub const fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn norm(hi: f64, lo: f64) -> Self {
        if !hi.is_finite() {
            return Self { hi, lo: 0.0 };
        }
        let (hi, lo) = fast_two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        Self::norm(p, e + self.lo * b)
    }

    fn map_hi(self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_f64(f(self.hi))
    }

    fn exp_impl(self) -> Self {
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::zero();
        }
        if self.hi.is_nan() {
            return self;
        }
        // x = k·ln2 + r; exp(r / 32) by Taylor series, then five squarings
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = (self - LN_2.mul_f64(k)).mul_f64(1.0 / 32.0);
        let mut term = Self::one();
        let mut sum = Self::one();
        for i in 1..=18 {
            term = term * r / Self::from_f64(i as f64);
            sum += term;
        }
        for _ in 0..5 {
            sum = sum * sum;
        }
        // scale by 2^k in two steps so neither factor overflows
        let half = (k / 2.0).trunc();
        sum.mul_f64(2f64.powi(half as i32)).mul_f64(2f64.powi((k - half) as i32))
    }

    fn ln_impl(self) -> Self {
        if !(self.hi > 0.0) || self.hi.is_infinite() {
            return Self::from_f64(self.hi.ln());
        }
        // Newton on exp(y) = x; each step doubles the correct digits
        let mut y = Self::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp_impl() - Self::one();
        }
        y
    }
}

const LN_2: Wide = Wide {
    hi: std::f64::consts::LN_2,
    lo: 2.319046813846299558e-17,
};

impl From<f64> for Wide {
    fn from(v: f64) -> Self {
        Self::from_f64(v)
    }
}

impl PartialEq for Wide {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for Wide {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Neg for Wide {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Wide {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        if !s.is_finite() {
            return Self::from_f64(s);
        }
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = fast_two_sum(s, e + t);
        Self::norm(s, e + f)
    }
}

impl Sub for Wide {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for Wide {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        if !p.is_finite() {
            return Self::from_f64(p);
        }
        Self::norm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Wide {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() || b.hi == 0.0 {
            return Self::from_f64(q1);
        }
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = fast_two_sum(q1, q2);
        Self { hi, lo } + Self::from_f64(q3)
    }
}

impl Rem for Wide {
    type Output = Self;
    fn rem(self, b: Self) -> Self {
        self - (self / b).trunc() * b
    }
}

macro_rules! assign_ops {
    ($($tr:ident $f:ident $op:tt),*) => {
        $(impl $tr for Wide {
            fn $f(&mut self, b: Self) {
                *self = *self $op b;
            }
        })*
    };
}

assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /, RemAssign rem_assign %);

impl Zero for Wide {
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for Wide {
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Num for Wide {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::from_f64)
    }
}

impl ToPrimitive for Wide {
    fn to_i64(&self) -> Option<i64> {
        let t = self.trunc();
        (t.hi as i128 + t.lo as i128).try_into().ok()
    }
    fn to_u64(&self) -> Option<u64> {
        let t = self.trunc();
        (t.hi as i128 + t.lo as i128).try_into().ok()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi + self.lo)
    }
}

impl FromPrimitive for Wide {
    fn from_i64(n: i64) -> Option<Self> {
        let hi = n as f64;
        Some(Self::norm(hi, (n as i128 - hi as i128) as f64))
    }
    fn from_u64(n: u64) -> Option<Self> {
        let hi = n as f64;
        Some(Self::norm(hi, (n as i128 - hi as i128) as f64))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Self::from_f64(n))
    }
}

impl NumCast for Wide {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        n.to_f64().map(Self::from_f64)
    }
}

impl fmt::Display for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&(self.hi + self.lo), f)
    }
}

impl fmt::LowerExp for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&(self.hi + self.lo), f)
    }
}

impl Float for Wide {
    fn nan() -> Self {
        Self::from_f64(f64::NAN)
    }
    fn infinity() -> Self {
        Self::from_f64(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self::from_f64(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self::from_f64(-0.0)
    }
    fn min_value() -> Self {
        Self::from_f64(f64::MIN)
    }
    fn min_positive_value() -> Self {
        Self::from_f64(f64::MIN_POSITIVE)
    }
    fn max_value() -> Self {
        Self::from_f64(f64::MAX)
    }
    fn epsilon() -> Self {
        Self::from_f64(2f64.powi(-104))
    }
    fn is_nan(self) -> bool {
        self.hi.is_nan() || self.lo.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi.classify()
    }
    fn floor(self) -> Self {
        let h = self.hi.floor();
        if h == self.hi {
            Self::norm(h, self.lo.floor())
        } else {
            Self::from_f64(h)
        }
    }
    fn ceil(self) -> Self {
        -(-self).floor()
    }
    fn round(self) -> Self {
        if self.hi < 0.0 {
            -(-self).round()
        } else {
            (self + Self::from_f64(0.5)).floor()
        }
    }
    fn trunc(self) -> Self {
        if self.hi < 0.0 {
            self.ceil()
        } else {
            self.floor()
        }
    }
    fn fract(self) -> Self {
        self - self.trunc()
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        self.map_hi(f64::signum)
    }
    fn is_sign_positive(self) -> bool {
        self.hi.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
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
        if self.hi > 0.0 {
            (n * self.ln_impl()).exp_impl()
        } else {
            Self::from_f64(self.hi.powf(n.hi))
        }
    }
    fn sqrt(self) -> Self {
        if !(self.hi > 0.0) || self.hi.is_infinite() {
            return Self::from_f64(self.hi.sqrt());
        }
        let s = self.hi.sqrt();
        let (p, e) = two_prod(s, s);
        let r = self - Self::norm(p, e);
        Self::norm(s, r.hi / (2.0 * s))
    }
    fn exp(self) -> Self {
        self.exp_impl()
    }
    fn exp2(self) -> Self {
        (self * LN_2).exp_impl()
    }
    fn ln(self) -> Self {
        self.ln_impl()
    }
    fn log(self, base: Self) -> Self {
        self.ln_impl() / base.ln_impl()
    }
    fn log2(self) -> Self {
        self.ln_impl() / LN_2
    }
    fn log10(self) -> Self {
        self.ln_impl() / Self::from_f64(10.0).ln_impl()
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
        if self.hi == 0.0 || !self.hi.is_finite() {
            return Self::from_f64(self.hi.cbrt());
        }
        let c = Self::from_f64(self.hi.cbrt());
        c - (c * c * c - self) / (Self::from_f64(3.0) * c * c)
    }
    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }
    fn sin(self) -> Self {
        self.map_hi(f64::sin)
    }
    fn cos(self) -> Self {
        self.map_hi(f64::cos)
    }
    fn tan(self) -> Self {
        self.map_hi(f64::tan)
    }
    fn asin(self) -> Self {
        self.map_hi(f64::asin)
    }
    fn acos(self) -> Self {
        self.map_hi(f64::acos)
    }
    fn atan(self) -> Self {
        self.map_hi(f64::atan)
    }
    fn atan2(self, other: Self) -> Self {
        Self::from_f64(self.hi.atan2(other.hi))
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        self.exp_impl() - Self::one()
    }
    fn ln_1p(self) -> Self {
        (self + Self::one()).ln_impl()
    }
    fn sinh(self) -> Self {
        self.map_hi(f64::sinh)
    }
    fn cosh(self) -> Self {
        self.map_hi(f64::cosh)
    }
    fn tanh(self) -> Self {
        self.map_hi(f64::tanh)
    }
    fn asinh(self) -> Self {
        self.map_hi(f64::asinh)
    }
    fn acosh(self) -> Self {
        self.map_hi(f64::acosh)
    }
    fn atanh(self) -> Self {
        self.map_hi(f64::atanh)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi.integer_decode()
    }
}
