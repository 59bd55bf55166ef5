//! Exact rational scalars and their text forms.
//!
//! Every combinatorial decision in the crate (subspace membership, LP
//! feasibility, polyhedron minimality) runs on [`Rational`], an arbitrary
//! precision fraction. Floats appear only once transcendental functions are
//! needed.

use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

/// Largest denominator accepted when a plain JSON number is read as a rational.
pub const MAX_DECIMAL_DENOMINATOR: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("`{0}` needs a denominator above {MAX_DECIMAL_DENOMINATOR}; write it as \"p/q\"")]
    DenominatorTooLarge(String),
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn to_f64(r: &Rational) -> f64 {
    // `ToPrimitive` on BigRational handles huge numerators/denominators.
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

pub fn vec_to_f64(v: &[Rational]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

/// Rational as a JSON-friendly string: `"p/q"`, or `"p"` for integers.
pub fn format(r: &Rational) -> String {
    r.to_string()
}

pub fn format_vec(v: &[Rational]) -> Vec<String> {
    v.iter().map(format).collect()
}

/// Parses `"p/q"` or an integer literal exactly, with no limit on size.
pub fn parse_fraction(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let malformed = || ParseRationalError::Malformed(s.to_string());
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| malformed())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| malformed())?;
            if q.is_zero() {
                return Err(ParseRationalError::ZeroDenominator(s.to_string()));
            }
            Ok(Rational::new(p, q))
        }
        None => {
            if s.contains(['.', 'e', 'E']) {
                parse_decimal(s)
            } else {
                BigInt::from_str(s)
                    .map(Rational::from_integer)
                    .map_err(|_| malformed())
            }
        }
    }
}

/// Parses a decimal literal (optionally with exponent) exactly. The value is
/// rejected when its reduced denominator exceeds [`MAX_DECIMAL_DENOMINATOR`].
pub fn parse_decimal(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    let malformed = || ParseRationalError::Malformed(s.to_string());
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = s[pos + 1..].parse().map_err(|_| malformed())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(malformed());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(malformed());
    }
    if exponent.abs() > 4096 {
        return Err(malformed());
    }
    let all_digits = format!("{whole}{frac}");
    let numerator = BigInt::from_str(if all_digits.is_empty() { "0" } else { &all_digits })
        .map_err(|_| malformed())?;
    let scale = exponent - frac.len() as i64;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(numerator * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numerator, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    if value.denom() > &BigInt::from(MAX_DECIMAL_DENOMINATOR) {
        return Err(ParseRationalError::DenominatorTooLarge(s.to_string()));
    }
    Ok(value)
}

/// Parses a comma-separated list of rationals such as `"3/10, 7/10"`.
pub fn parse_list(text: &str) -> Result<Vec<Rational>, ParseRationalError> {
    let s = text.trim().trim_start_matches('[').trim_end_matches(']');
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|item| parse_fraction(item.trim().trim_matches('"')))
        .collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

pub fn l1_norm(v: &[Rational]) -> Rational {
    v.iter().fold(Rational::zero(), |acc, x| acc + x.abs())
}

pub fn is_integer_vec(v: &[Rational]) -> bool {
    v.iter().all(|x| x.is_integer())
}

pub fn unit(dim: usize, i: usize) -> Vec<Rational> {
    let mut e = vec![Rational::zero(); dim];
    e[i] = Rational::one();
    e
}
