//! Exact rationals and probabilities.
//!
//! Probabilities are carried as reduced big rationals. Sampling compares a
//! uniform 64-bit word against the fixed-point threshold `floor(p * 2^64)`,
//! so the realised retention probability differs from `p` by less than
//! `2^-64`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{LabError, Result};

pub type Rational = BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"a/b"`, an integer, or a finite decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || LabError::parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let frac_num: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mut value = Rational::from_integer(whole.abs()) + Rational::new(frac_num, scale);
        if negative {
            value = -value;
        }
        return Ok(value);
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// `"num/den"`, always with an explicit denominator.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A probability in `[0, 1]` together with its 64-bit sampling threshold.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Probability {
    value: Rational,
    threshold: u128,
}

impl Probability {
    pub fn new(value: Rational) -> Result<Self> {
        if value.is_negative() || value > Rational::one() {
            return Err(LabError::InvalidProbability(format_rational(&value)));
        }
        let scaled: BigInt = (value.numer() << 64u32) / value.denom();
        let threshold = scaled
            .to_u128()
            .ok_or_else(|| LabError::InvalidProbability(format_rational(&value)))?;
        Ok(Self { value, threshold })
    }

    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(LabError::InvalidProbability(format!("{num}/{den}")));
        }
        Self::new(ratio(num, den))
    }

    pub fn zero() -> Self {
        Self::new(Rational::zero()).expect("0 is a probability")
    }

    pub fn one() -> Self {
        Self::new(Rational::one()).expect("1 is a probability")
    }

    pub fn value(&self) -> &Rational {
        &self.value
    }

    pub fn complement(&self) -> Rational {
        Rational::one() - &self.value
    }

    /// `floor(p * 2^64)`; a word `w` is a success iff `w < threshold`.
    pub fn threshold(&self) -> u128 {
        self.threshold
    }

    #[inline]
    pub fn accepts(&self, word: u64) -> bool {
        (word as u128) < self.threshold
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.value)
    }

    /// Numerator and denominator as `u64`, as required by the on-disk formats.
    pub fn as_u64_pair(&self) -> Result<(u64, u64)> {
        let n = self.value.numer().to_u64();
        let d = self.value.denom().to_u64();
        match (n, d) {
            (Some(n), Some(d)) => Ok((n, d)),
            _ => Err(LabError::param(format!(
                "probability {self} does not fit 64-bit numerator/denominator"
            ))),
        }
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.value))
    }
}

impl fmt::Debug for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Probability({self})")
    }
}

impl FromStr for Probability {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(parse_rational(s)?)
    }
}
