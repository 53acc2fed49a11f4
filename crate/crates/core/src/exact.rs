//! Small helpers for exact rational arithmetic shared across the crate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use thiserror::Error;

/// Integer power of an exact rational. Negative exponents invert the base
/// (and panic on a zero base, which no caller reaches).
pub fn pow(base: &BigRational, exp: i64) -> BigRational {
    if exp == 0 {
        return BigRational::one();
    }
    let e = i32::try_from(exp).expect("exponent out of range");
    Pow::pow(base.clone(), e)
}

/// Rational from an integer.
pub fn int(value: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(value.into())
}

/// Rational from a numerator/denominator pair.
pub fn ratio(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> BigRational {
    BigRational::new(numer.into(), denom.into())
}

/// Nearest `f64` approximation (NaN if the conversion fails).
pub fn approx(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty value")]
    Empty,
    #[error("invalid rational literal {0:?}")]
    Invalid(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// Parses `"3"`, `"3/4"`, or `"0.75"` into an exact rational.
///
/// Decimal literals are read digit-for-digit (`0.1` becomes exactly 1/10),
/// never through floating point.
pub fn parse_rational(text: &str) -> Result<BigRational, ParseRationalError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let invalid = || ParseRationalError::Invalid(text.to_owned());
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| invalid())?;
        let den: BigInt = den.trim().parse().map_err(|_| invalid())?;
        if den.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(text.to_owned()));
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid());
        }
        let (sign, digits) = match whole.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, whole.strip_prefix('+').unwrap_or(whole)),
        };
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid());
        }
        let mantissa: BigInt = format!("{digits}{frac}").parse().map_err(|_| invalid())?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(BigRational::new(BigInt::from(sign) * mantissa, scale));
    }
    let value: BigInt = text.parse().map_err(|_| invalid())?;
    Ok(BigRational::from_integer(value))
}

/// Numerator/denominator of a reduced non-negative rational as `u64`s,
/// when both fit.
pub fn as_u64_ratio(value: &BigRational) -> Option<(u64, u64)> {
    Some((value.numer().to_u64()?, value.denom().to_u64()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_handles_negative_exponents() {
        let half = ratio(1, 2);
        assert_eq!(pow(&half, 3), ratio(1, 8));
        assert_eq!(pow(&half, -2), int(4));
        assert_eq!(pow(&half, 0), int(1));
    }

    #[test]
    fn parses_integers_fractions_and_decimals() {
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert_eq!(parse_rational("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse_rational(" 1 / 2 ").unwrap(), ratio(1, 2));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_rational("").is_err());
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1.").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }
}
