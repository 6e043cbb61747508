//! Exact rational helpers.
//!
//! All stencil arithmetic runs on [`Rational`], an arbitrary-precision
//! fraction that is always stored reduced with a positive denominator.

use std::ops::{Add, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `k^e / e!` as an exact fraction.
pub fn power_over_factorial(k: u64, e: u32) -> Rational {
    Rational::new(num::pow(BigInt::from(k), e as usize), factorial(e))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Formats as `a/b`, or `a` when the denominator is one.
pub fn format_fraction(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses an exact number written as an integer (`-3`), a fraction
/// (`22/7`, `-145/2`) or a terminating decimal (`0.125`, `-2.5`).
pub fn parse_fraction(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let numer = parse_integer(num)?;
        let denom = parse_integer(den)?;
        if denom.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(numer, denom));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if whole.len() - whole_digits.len() > 1 {
            return Err(Error::Parse(format!("bad sign in {s:?}")));
        }
        if (whole_digits.is_empty() && frac.is_empty())
            || !whole_digits.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(Error::Parse(format!("bad decimal {s:?}")));
        }
        let digits = format!("{whole_digits}{frac}");
        let mantissa: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits
                .parse()
                .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?
        };
        let scale = num::pow(BigInt::from(10), frac.len());
        let value = Rational::new(mantissa, scale);
        return Ok(if negative { -value } else { value });
    }
    Ok(Rational::from_integer(parse_integer(s)?))
}

fn parse_integer(text: &str) -> Result<BigInt> {
    let t = text.trim();
    let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse(format!("bad integer {text:?}")));
    }
    t.parse()
        .map_err(|_| Error::Parse(format!("bad integer {text:?}")))
}

/// Numbers the stencil formulas can run on: exact fractions or doubles.
///
/// Quadrature-approximated stencils with irrational nodes only exist as
/// doubles, so the dispersion coefficients are written once against this
/// trait.
pub trait Scalar:
    Clone
    + std::fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_rational(r: &Rational) -> Self;
    fn divide(&self, other: &Self) -> Self;
    fn magnitude(&self) -> f64;
    fn as_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        to_f64(r)
    }
    fn divide(&self, other: &Self) -> Self {
        self / other
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn divide(&self, other: &Self) -> Self {
        self / other
    }
    fn magnitude(&self) -> f64 {
        to_f64(&self.abs())
    }
    fn as_f64(&self) -> f64 {
        to_f64(self)
    }
}

/// Continued-fraction approximation of `x` with denominator at most
/// `max_denom`. Returns `None` if no such fraction is within `tol`.
pub fn rationalize(x: f64, max_denom: u64, tol: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_denom as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= tol {
            return Some(Rational::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = rem - a;
        if frac == 0.0 {
            break;
        }
        rem = 1.0 / frac;
    }
    None
}
