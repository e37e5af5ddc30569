//! Number modes for IFS geometry.
//!
//! Maps are either held as exact rationals ([`Exact`]) or as double-double
//! floats ([`Approx`], 106-bit significand). Each IFS is generic over one
//! mode, so mixing modes inside a single system cannot type-check; the
//! dynamic entry points ([`Literal`], [`parse_literals`]) reject mixed input.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

pub type Exact = BigRational;
pub type Approx = TwoFloat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumberMode {
    Exact,
    Approx,
}

impl fmt::Display for NumberMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumberMode::Exact => f.write_str("exact-rational"),
            NumberMode::Approx => f.write_str("double-double"),
        }
    }
}

/// Scalar field used for map coefficients.
pub trait Real: Signed + Clone + PartialOrd + fmt::Debug + Send + Sync + 'static {
    const MODE: NumberMode;

    fn as_f64(&self) -> f64;

    /// Total order; both modes never hold NaN.
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).expect("coefficients are never NaN")
    }

    fn from_rational(value: &BigRational) -> Self;

    fn render(&self) -> String;
}

impl Real for Exact {
    const MODE: NumberMode = NumberMode::Exact;

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn from_rational(value: &BigRational) -> Self {
        value.clone()
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

impl Real for Approx {
    const MODE: NumberMode = NumberMode::Approx;

    fn as_f64(&self) -> f64 {
        self.hi() + self.lo()
    }

    fn from_rational(value: &BigRational) -> Self {
        let hi = ToPrimitive::to_f64(value).unwrap_or(f64::NAN);
        let Some(hi_exact) = BigRational::from_float(hi) else {
            return TwoFloat::from_f64(hi);
        };
        let lo = ToPrimitive::to_f64(&(value - hi_exact)).unwrap_or(0.0);
        TwoFloat::new_add(hi, lo)
    }

    fn render(&self) -> String {
        format!("{:e}", Real::as_f64(self))
    }
}

/// A parsed numeric literal, before the number mode of its system is fixed.
///
/// `"p/q"` and integer strings are exact; decimal or exponent notation
/// selects the float mode (parsed exactly, then rounded once to
/// double-double).
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Exact(BigRational),
    Approx(BigRational),
}

impl Literal {
    pub fn mode(&self) -> NumberMode {
        match self {
            Literal::Exact(_) => NumberMode::Exact,
            Literal::Approx(_) => NumberMode::Approx,
        }
    }

    pub fn value(&self) -> &BigRational {
        match self {
            Literal::Exact(v) | Literal::Approx(v) => v,
        }
    }

    pub fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self.value()).unwrap_or(f64::NAN)
    }

    pub fn from_f64(value: f64) -> Result<Self> {
        BigRational::from_float(value)
            .map(Literal::Approx)
            .ok_or_else(|| Error::Parse(format!("non-finite number {value}")))
    }

    pub fn from_i64(value: i64) -> Self {
        Literal::Exact(BigRational::from_integer(value.into()))
    }
}

impl std::str::FromStr for Literal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() {
            return Err(Error::Parse("empty number".into()));
        }
        if let Some((num, den)) = t.split_once('/') {
            let n = parse_int(num, s)?;
            let d = parse_int(den, s)?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in '{s}'")));
            }
            return Ok(Literal::Exact(BigRational::new(n, d)));
        }
        if t.bytes().all(|b| b.is_ascii_digit() || b == b'-' || b == b'+') {
            return Ok(Literal::Exact(BigRational::from_integer(parse_int(t, s)?)));
        }
        parse_decimal(t).map(Literal::Approx).ok_or_else(|| Error::Parse(format!("invalid number '{s}'")))
    }
}

fn parse_int(part: &str, whole: &str) -> Result<BigInt> {
    let p = part.trim();
    let p = p.strip_prefix('+').unwrap_or(p);
    p.parse::<BigInt>().map_err(|_| Error::Parse(format!("invalid rational '{whole}'")))
}

/// Exact decimal parse: `[-+]digits[.digits][e[-+]digits]`.
fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse::<BigInt>().ok()? / BigInt::from(10);
    let scale = exp - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    let mut value = BigRational::from_integer(digits);
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Some(if neg { -value } else { value })
}

/// Common mode of a batch of literals, or a mixed-mode error.
pub fn common_mode<'a>(lits: impl IntoIterator<Item = &'a Literal>) -> Result<NumberMode> {
    let mut mode = None;
    for lit in lits {
        match mode {
            None => mode = Some(lit.mode()),
            Some(m) if m != lit.mode() => {
                return Err(Error::MixedMode(
                    "exact rationals and decimal floats in one system".into(),
                ))
            }
            _ => {}
        }
    }
    mode.ok_or_else(|| Error::Parse("no numbers supplied".into()))
}

/// Parses a list of literal strings.
pub fn parse_literals<S: AsRef<str>>(items: &[S]) -> Result<Vec<Literal>> {
    items.iter().map(|s| s.as_ref().parse()).collect()
}

pub fn rational(n: i64, d: i64) -> Exact {
    BigRational::new(n.into(), d.into())
}

pub(crate) fn max_abs<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    values
        .into_iter()
        .map(|v| v.abs())
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals_exactly() {
        let lit: Literal = "2/6".parse().unwrap();
        assert_eq!(lit, Literal::Exact(rational(1, 3)));
        let lit: Literal = "-3".parse().unwrap();
        assert_eq!(lit, Literal::Exact(rational(-3, 1)));
        let lit: Literal = " 4/-8 ".parse().unwrap();
        assert_eq!(lit, Literal::Exact(rational(-1, 2)));
    }

    #[test]
    fn decimals_are_float_mode_but_parsed_exactly() {
        let lit: Literal = "0.2".parse().unwrap();
        assert_eq!(lit, Literal::Approx(rational(1, 5)));
        let lit: Literal = "-1.5e-2".parse().unwrap();
        assert_eq!(lit, Literal::Approx(rational(-3, 200)));
        let lit: Literal = ".5".parse().unwrap();
        assert_eq!(lit, Literal::Approx(rational(1, 2)));
    }

    #[test]
    fn rejects_bad_literals() {
        for bad in ["1/0", "", "abc", "1/2/3", "1.2.3", "e5", "--1"] {
            assert!(bad.parse::<Literal>().is_err(), "{bad}");
        }
    }

    #[test]
    fn double_double_keeps_more_than_53_bits() {
        let third = Approx::from_rational(&rational(1, 3));
        assert!(third.lo() != 0.0);
        let back = third * Approx::from_f64(3.0) - Approx::from_f64(1.0);
        assert!(back.as_f64().abs() < 1e-30);
    }

    #[test]
    fn mixed_modes_are_rejected() {
        let lits = parse_literals(&["1/3", "0.5"]).unwrap();
        assert!(matches!(common_mode(&lits), Err(Error::MixedMode(_))));
        let lits = parse_literals(&["1/3", "2"]).unwrap();
        assert_eq!(common_mode(&lits).unwrap(), NumberMode::Exact);
    }
}
