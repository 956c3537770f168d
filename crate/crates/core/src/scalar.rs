//! Scalar abstractions.
//!
//! The LUT, fusion, resampling and apply-gradient code only needs a field with
//! an ordering and a floor, so it runs on `f32`, `f64` and exact rationals.
//! Losses, the predictor and the optimizer additionally need transcendental
//! functions and are bounded on [`Real`]. [`Wide`] (double-double) serves as
//! a high-precision reference for finite differences.

use std::fmt::{Debug, Display, LowerExp};

use num_rational::Rational64;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

pub use crate::wide::Wide;

/// Ordered field element usable by the multilinear parts of the engine.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Largest integer `i` with `i <= self`, for non-negative values.
    fn floor_index(self) -> usize;

    /// True for NaN (floats only; rationals are never NaN).
    fn is_nan_value(self) -> bool;

    /// False for NaN or infinities.
    fn is_finite_value(self) -> bool;

    /// Converts a primitive literal; panics only for values the type cannot hold.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable")
    }

    fn from_index(i: usize) -> Self {
        Self::from_usize(i).expect("index not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn clamp_unit(self) -> Self {
        if self < Self::zero() {
            Self::zero()
        } else if self > Self::one() {
            Self::one()
        } else {
            self
        }
    }
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn floor_index(self) -> usize {
                <$t>::floor(self) as usize
            }
            #[inline]
            fn is_nan_value(self) -> bool {
                <$t>::is_nan(self)
            }
            #[inline]
            fn is_finite_value(self) -> bool {
                <$t>::is_finite(self)
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for Wide {
    fn floor_index(self) -> usize {
        Float::floor(self).hi() as usize
    }
    fn is_nan_value(self) -> bool {
        Float::is_nan(self)
    }
    fn is_finite_value(self) -> bool {
        Float::is_finite(self)
    }
}

impl Scalar for Rational64 {
    fn floor_index(self) -> usize {
        self.floor().to_integer() as usize
    }
    fn is_nan_value(self) -> bool {
        false
    }
    fn is_finite_value(self) -> bool {
        true
    }
}

/// Floating-point scalar: everything the losses, predictor and trainer need.
pub trait Real:
    Scalar + Float + Default + Display + LowerExp
{
    /// Type used to accumulate long sums: at least `f64`.
    type Acc: Real;

    fn widen(self) -> Self::Acc;

    fn narrow(acc: Self::Acc) -> Self;

    /// `C += A·B` with `A: m×k`, `B: k×n` addressed through `(row, column)`
    /// strides and `C` a contiguous row-major `m×n` block.
    #[allow(clippy::too_many_arguments)]
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        c: &mut [Self],
    ) {
        check_gemm(m, k, n, a.len(), a_strides, b.len(), b_strides, c.len());
        for i in 0..m {
            let row = &mut c[i * n..(i + 1) * n];
            for p in 0..k {
                let av = a[i * a_strides.0 + p * a_strides.1];
                let b0 = p * b_strides.0;
                for (j, cv) in row.iter_mut().enumerate() {
                    *cv = *cv + av * b[b0 + j * b_strides.1];
                }
            }
        }
    }
}

/// Panics unless every strided index of a [`Real::gemm_acc`] call is in bounds.
#[allow(clippy::too_many_arguments)]
fn check_gemm(
    m: usize,
    k: usize,
    n: usize,
    a_len: usize,
    (ra, ca): (usize, usize),
    b_len: usize,
    (rb, cb): (usize, usize),
    c_len: usize,
) {
    let last = |rows: usize, cols: usize, r: usize, c: usize| (rows - 1) * r + (cols - 1) * c;
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(last(m, k, ra, ca) < a_len, "gemm: A out of bounds");
    assert!(last(k, n, rb, cb) < b_len, "gemm: B out of bounds");
    assert!(m * n <= c_len, "gemm: C out of bounds");
}

macro_rules! fast_gemm {
    ($kernel:ident) => {
        fn gemm_acc(
            m: usize,
            k: usize,
            n: usize,
            a: &[Self],
            a_strides: (usize, usize),
            b: &[Self],
            b_strides: (usize, usize),
            c: &mut [Self],
        ) {
            check_gemm(m, k, n, a.len(), a_strides, b.len(), b_strides, c.len());
            if m == 0 || k == 0 || n == 0 {
                return;
            }
            // SAFETY: check_gemm bounds every index the kernel touches.
            unsafe {
                matrixmultiply::$kernel(
                    m,
                    k,
                    n,
                    1.0,
                    a.as_ptr(),
                    a_strides.0 as isize,
                    a_strides.1 as isize,
                    b.as_ptr(),
                    b_strides.0 as isize,
                    b_strides.1 as isize,
                    1.0,
                    c.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
    };
}

impl Real for f32 {
    type Acc = f64;
    fn widen(self) -> f64 {
        self as f64
    }
    fn narrow(acc: f64) -> Self {
        acc as f32
    }
    fast_gemm!(sgemm);
}

impl Real for f64 {
    type Acc = f64;
    fn widen(self) -> f64 {
        self
    }
    fn narrow(acc: f64) -> Self {
        acc
    }
    fast_gemm!(dgemm);
}

impl Real for Wide {
    type Acc = Wide;
    fn widen(self) -> Self {
        self
    }
    fn narrow(acc: Self) -> Self {
        acc
    }
}

/// Converts between scalar types through `f64`.
#[inline]
pub fn cast<A: Scalar, B: Scalar>(v: A) -> B {
    B::lit(v.to_f64_lossy())
}
