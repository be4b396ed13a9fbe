//! Number types shared by the exact and floating code paths.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use smallvec::SmallVec;

use crate::lie::{NilpotentAlgebra, Tables};

/// Exact rational numbers.
pub type Rational = BigRational;

/// Coordinate vector. Dimensions in this crate are small, so vectors stay inline.
pub type Coords<T> = SmallVec<[T; 8]>;

/// Commutative ring operations, enough to evaluate brackets and BCH polynomials.
pub trait Ring:
    Clone + Debug + PartialEq + Send + Sync + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + 'static
{
    fn from_rational(q: &Rational) -> Self;
}

/// Field operations needed by the Lie and lattice arithmetic.
///
/// Implemented for `f64` (Monte-Carlo loops) and [`Rational`] (validation and
/// exact oracles).
pub trait Scalar: Ring + PartialOrd + Div<Output = Self> {
    fn from_i64(n: i64) -> Self;
    fn floor(&self) -> Self;
    fn to_float(&self) -> f64;
    fn is_finite(&self) -> bool;
    /// Floor as an integer, used for lattice words.
    fn floor_int(&self) -> BigInt;
    /// Structure constants and BCH coefficients in this number type.
    fn tables(alg: &NilpotentAlgebra) -> &Tables<Self>;
    fn bch_impl(alg: &NilpotentAlgebra, x: &[Self], y: &[Self]) -> Coords<Self>;
    fn first_from_second_impl(alg: &NilpotentAlgebra, t: &[Self]) -> Coords<Self>;
    fn second_from_first_impl(alg: &NilpotentAlgebra, x: &[Self]) -> Coords<Self>;
}

impl Ring for f64 {
    #[inline]
    fn from_rational(q: &Rational) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    #[inline]
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    #[inline]
    fn to_float(&self) -> f64 {
        *self
    }
    #[inline]
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn floor_int(&self) -> BigInt {
        BigInt::from(f64::floor(*self) as i64)
    }
    #[inline]
    fn tables(alg: &NilpotentAlgebra) -> &Tables<Self> {
        alg.float_tables()
    }
    #[inline]
    fn bch_impl(alg: &NilpotentAlgebra, x: &[Self], y: &[Self]) -> Coords<Self> {
        alg.compiled().bch(x, y)
    }
    #[inline]
    fn first_from_second_impl(alg: &NilpotentAlgebra, t: &[Self]) -> Coords<Self> {
        alg.compiled().to_first.eval(t)
    }
    #[inline]
    fn second_from_first_impl(alg: &NilpotentAlgebra, x: &[Self]) -> Coords<Self> {
        alg.compiled().to_second.eval(x)
    }
}

impl Ring for Rational {
    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }
}

impl Scalar for Rational {
    fn from_i64(n: i64) -> Self {
        Rational::from_integer(BigInt::from(n))
    }
    fn floor(&self) -> Self {
        Rational::floor(self)
    }
    fn to_float(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_finite(&self) -> bool {
        true
    }
    fn floor_int(&self) -> BigInt {
        Rational::floor(self).to_integer()
    }
    fn tables(alg: &NilpotentAlgebra) -> &Tables<Self> {
        alg.exact_tables()
    }
    fn bch_impl(alg: &NilpotentAlgebra, x: &[Self], y: &[Self]) -> Coords<Self> {
        alg.exact_tables().bch(x, y)
    }
    fn first_from_second_impl(alg: &NilpotentAlgebra, t: &[Self]) -> Coords<Self> {
        alg.exact_tables().first_from_second(t)
    }
    fn second_from_first_impl(alg: &NilpotentAlgebra, x: &[Self]) -> Coords<Self> {
        alg.exact_tables().second_from_first(x)
    }
}

/// Convenience constructor for `num / den`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

pub fn is_integer(q: &Rational) -> bool {
    q.is_integer()
}

pub fn abs_rational(q: &Rational) -> Rational {
    q.abs()
}

pub fn zeros<T: Ring>(d: usize) -> Coords<T> {
    (0..d).map(|_| T::zero()).collect()
}

pub fn unit<T: Ring>(d: usize, i: usize) -> Coords<T> {
    let mut v = zeros(d);
    v[i] = T::one();
    v
}

pub fn to_float_coords<T: Scalar>(v: &[T]) -> Coords<f64> {
    v.iter().map(Scalar::to_float).collect()
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}


/// Best rational approximation with denominator at most `max_den`, if it is within `tol`.
pub fn approx_rational(x: f64, tol: f64, max_den: i64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    // continued-fraction convergents
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if (x - p1 as f64 / q1 as f64).abs() <= tol {
            return Some(ratio(p1, q1));
        }
        let frac = r - a as f64;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}
