//! Scalar abstractions for filter banks.
//!
//! The transformation pipeline runs twice over a bank: once in real
//! arithmetic (pre-quantization) and once in 8-bit integer arithmetic
//! (post-quantization). [`BankScalar`] captures the small set of operations
//! the pair-mean and symmetrization stages need from either domain, so the
//! stage implementations are written once. Real banks are generic over
//! [`Real`] (`f32` or `f64`); integer banks are fixed to `i8`.

use std::fmt::{Debug, Display};
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point element type for pre-quantization banks.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + Display
    + Debug
    + Default
    + BankScalar<Mean = Self>
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Element arithmetic required by the pair-mean and symmetrization stages.
pub trait BankScalar: Copy + PartialEq + Debug + 'static {
    /// Pair-mean representation: the element type itself for real banks,
    /// `i16` for int8 banks (integer means are stored in 16-bit containers).
    type Mean: Copy + PartialEq + Debug + Display;
    /// Wide accumulator for summing bank elements.
    type Acc: Default + Copy;
    /// Distance measure used to pick which twin survives symmetrization.
    type Dist: PartialOrd;

    fn acc_add(acc: Self::Acc, v: Self) -> Self::Acc;

    /// Mean of `count` accumulated elements. Integer banks round half away
    /// from zero; real banks divide exactly.
    fn mean_from(acc: Self::Acc, count: usize) -> Self::Mean;

    /// `|v - m|` as an ordered key.
    fn dist(v: Self, m: Self::Mean) -> Self::Dist;

    /// The mirror image `2m - v`. The flag reports saturation: integer
    /// mirrors are clamped to `[-127, 127]` when the exact value falls
    /// outside; real mirrors never saturate.
    fn mirror(v: Self, m: Self::Mean) -> (Self, bool);

    /// Whether `a + b` equals `2m`: exact for integers, within one unit in
    /// the last place for real banks (the mirror subtraction may round).
    fn pair_sum_matches(a: Self, b: Self, m: Self::Mean) -> bool;
}

macro_rules! real_bank_scalar {
    ($t:ty) => {
        impl BankScalar for $t {
            type Mean = $t;
            type Acc = $t;
            type Dist = $t;

            fn acc_add(acc: $t, v: $t) -> $t {
                acc + v
            }

            fn mean_from(acc: $t, count: usize) -> $t {
                acc / (count as $t)
            }

            fn dist(v: $t, m: $t) -> $t {
                (v - m).abs()
            }

            fn mirror(v: $t, m: $t) -> ($t, bool) {
                ((m + m) - v, false)
            }

            fn pair_sum_matches(a: $t, b: $t, m: $t) -> bool {
                let target = m + m;
                let tol = target.abs().max(<$t>::MIN_POSITIVE) * <$t>::EPSILON;
                ((a + b) - target).abs() <= tol
            }
        }
    };
}

real_bank_scalar!(f32);
real_bank_scalar!(f64);

/// Quantized weights saturate at ±127; -128 is reserved so that the later
/// subtract-one complementization step cannot wrap.
pub const INT_WEIGHT_MIN: i32 = -127;
pub const INT_WEIGHT_MAX: i32 = 127;

impl BankScalar for i8 {
    type Mean = i16;
    type Acc = i64;
    type Dist = i32;

    fn acc_add(acc: i64, v: i8) -> i64 {
        acc + i64::from(v)
    }

    fn mean_from(acc: i64, count: usize) -> i16 {
        div_round_half_away(acc, count as i64) as i16
    }

    fn dist(v: i8, m: i16) -> i32 {
        (i32::from(v) - i32::from(m)).abs()
    }

    fn mirror(v: i8, m: i16) -> (i8, bool) {
        let exact = 2 * i32::from(m) - i32::from(v);
        let clamped = exact.clamp(INT_WEIGHT_MIN, INT_WEIGHT_MAX);
        (clamped as i8, clamped != exact)
    }

    fn pair_sum_matches(a: i8, b: i8, m: i16) -> bool {
        i32::from(a) + i32::from(b) == 2 * i32::from(m)
    }
}

/// Integer division rounding half away from zero. `den` must be positive.
pub(crate) fn div_round_half_away(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    let q = num / den;
    let r = num % den;
    if 2 * r.abs() >= den {
        q + num.signum()
    } else {
        q
    }
}
