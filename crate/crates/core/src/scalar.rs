//! Number representation shared by the analytic modules.
//!
//! Everything analytic is generic over [`Scalar`], implemented for exact
//! rationals ([`Ratio`]) and for binary64. Network descriptions always hold
//! exact rationals; float mode converts at the boundary of each computation.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::ParseRatioError;

/// Arbitrary-precision rational number.
pub type Ratio = BigRational;

/// Field operations plus the tolerance hooks needed by elimination and simplex.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True for exact arithmetic; tolerances collapse to zero.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_ratio(r: &Ratio) -> Self;
    /// Floats go through their shortest decimal; non-finite values map to zero.
    fn to_ratio(&self) -> Ratio;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;

    /// `eps` in float mode, exactly zero in rational mode.
    fn tol(eps: f64) -> Self;

    /// Exact values render as `"p/q"` strings, floats as JSON numbers.
    fn to_json(&self) -> Value;

    fn from_int(i: i64) -> Self {
        Self::from_ratio(&Ratio::from_integer(BigInt::from(i)))
    }

    fn is_zero_within(&self, eps: f64) -> bool {
        self.abs() <= Self::tol(eps)
    }
}

impl Scalar for Ratio {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_ratio(r: &Ratio) -> Self {
        r.clone()
    }
    fn to_ratio(&self) -> Ratio {
        self.clone()
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn tol(_eps: f64) -> Self {
        Zero::zero()
    }
    fn to_json(&self) -> Value {
        Value::String(format_ratio(self))
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_ratio(r: &Ratio) -> Self {
        ratio_to_f64(r)
    }
    fn to_ratio(&self) -> Ratio {
        ratio_from_f64(*self).unwrap_or_else(Zero::zero)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn tol(eps: f64) -> Self {
        eps
    }
    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

/// Converts with correct rounding for the common small case and falls back to
/// a scaled division when numerator or denominator overflow `f64`.
pub fn ratio_to_f64(r: &Ratio) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() {
            return v;
        }
    }
    let numer = r.numer();
    let denom = r.denom();
    let shift = numer.bits().max(denom.bits()).saturating_sub(1000);
    let n = (numer >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (denom >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

pub fn ratio(numer: i64, denom: i64) -> Ratio {
    Ratio::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(v: i64) -> Ratio {
    Ratio::from_integer(BigInt::from(v))
}

/// `"p/q"` in lowest terms; integers print without a denominator.
pub fn format_ratio(r: &Ratio) -> String {
    r.to_string()
}

/// Accepts `"p/q"`, `"p"` and finite decimals such as `"0.25"` or `"1e-3"`.
pub fn parse_ratio(text: &str) -> Result<Ratio, ParseRatioError> {
    let s = text.trim();
    let bad = |reason: &str| ParseRatioError {
        input: text.to_string(),
        reason: reason.to_string(),
    };
    if s.is_empty() {
        return Err(bad("empty"));
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad("numerator is not an integer"))?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad("denominator is not an integer"))?;
        if q.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(Ratio::new(p, q));
    }
    parse_decimal(s).ok_or_else(|| bad("not a rational or decimal literal"))
}

fn parse_decimal(s: &str) -> Option<Ratio> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = Ratio::from_integer(BigInt::from_str(&digits).ok()?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    if scale >= 0 {
        value *= Ratio::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Ratio::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Float inputs are read through their shortest round-trip decimal form, so
/// `0.2` becomes exactly `1/5`.
pub fn ratio_from_f64(v: f64) -> Option<Ratio> {
    if !v.is_finite() {
        return None;
    }
    parse_decimal(&format!("{v:e}")).or_else(|| Ratio::from_f64(v))
}

pub fn vec_to_json<S: Scalar>(v: &[S]) -> Value {
    Value::Array(v.iter().map(Scalar::to_json).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_and_decimal_forms() {
        assert_eq!(parse_ratio("7/30").unwrap(), ratio(7, 30));
        assert_eq!(parse_ratio(" 14 / 28 ").unwrap(), ratio(1, 2));
        assert_eq!(parse_ratio("0.2").unwrap(), ratio(1, 5));
        assert_eq!(parse_ratio("3").unwrap(), int(3));
        assert_eq!(parse_ratio("-1.5e1").unwrap(), int(-15));
        assert_eq!(parse_ratio("2.5e-1").unwrap(), ratio(1, 4));
    }

    #[test]
    fn rejects_zero_denominator_and_garbage() {
        let err = parse_ratio("1/0").unwrap_err();
        assert!(err.reason.contains("zero denominator"));
        assert!(parse_ratio("abc").is_err());
        assert!(parse_ratio("").is_err());
        assert!(parse_ratio("1/x").is_err());
    }

    #[test]
    fn float_literals_become_short_decimals() {
        assert_eq!(ratio_from_f64(0.2).unwrap(), ratio(1, 5));
        assert_eq!(ratio_from_f64(0.3).unwrap(), ratio(3, 10));
        assert_eq!(ratio_from_f64(1.0).unwrap(), int(1));
        assert!(ratio_from_f64(f64::NAN).is_none());
    }

    #[test]
    fn huge_ratios_still_convert() {
        let big = Ratio::new(
            num_traits::pow(BigInt::from(3), 900),
            num_traits::pow(BigInt::from(3), 899),
        );
        assert!((ratio_to_f64(&big) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn json_rendering() {
        assert_eq!(ratio(14, 23).to_json(), Value::String("14/23".into()));
        assert_eq!(0.5f64.to_json(), serde_json::json!(0.5));
    }
}
