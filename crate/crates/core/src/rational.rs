//! Exact rational helpers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The exact rational value of a finite binary float.
pub fn lift(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidInput(format!("non-finite value {x} cannot be made exact")))
}

/// Nearest-ish `f64` for reporting; exactness is never derived from it.
pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn int(n: u128) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `lambda^-n` as an exact rational.
pub fn inv_pow(lambda: u32, n: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(lambda).pow(n))
}

/// Parses `"p/q"`, an integer, or a decimal literal such as `"0.3"` or
/// `"1.5e-3"` into the rational it denotes (decimals are NOT routed through
/// binary floating point).
pub fn parse(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidInput(format!("cannot parse {s:?} as a rational"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::InvalidInput(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10u32);
    let mut q = if scale >= 0 {
        BigRational::from_integer(digits * ten.pow(scale as u32))
    } else {
        BigRational::new(digits, ten.pow((-scale) as u32))
    };
    if neg {
        q = -q;
    }
    Ok(q)
}

/// `floor(q)` for a nonnegative rational, as `u128`.
pub fn floor_u128(q: &BigRational) -> Option<u128> {
    if q.is_negative() {
        return None;
    }
    let (quot, _) = q.numer().div_rem(q.denom());
    quot.to_u128()
}

/// Serialized form of an exact rational: `[numerator, denominator]`, each a
/// JSON integer when it fits in 64 bits and a decimal string otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactPair(pub IntRepr, pub IntRepr);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntRepr {
    Small(i64),
    Big(String),
}

impl IntRepr {
    pub fn from_bigint(n: &BigInt) -> Self {
        match n.to_i64() {
            Some(v) => IntRepr::Small(v),
            None => IntRepr::Big(n.to_string()),
        }
    }

    pub fn to_bigint(&self) -> Result<BigInt> {
        match self {
            IntRepr::Small(v) => Ok(BigInt::from(*v)),
            IntRepr::Big(s) => s
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad integer literal {s:?}"))),
        }
    }
}

impl ExactPair {
    pub fn from_rational(q: &BigRational) -> Self {
        ExactPair(
            IntRepr::from_bigint(q.numer()),
            IntRepr::from_bigint(q.denom()),
        )
    }

    pub fn to_rational(&self) -> Result<BigRational> {
        let den = self.1.to_bigint()?;
        if den.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        Ok(BigRational::new(self.0.to_bigint()?, den))
    }
}

/// `"p/q"` display used in reports.
pub fn display(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Serde adapter writing a rational as its `"p/q"` string.
pub mod as_string {
    use num_rational::BigRational;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::display(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_adapter_round_trip() {
        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "as_string")] BigRational);
        let json = serde_json::to_string(&W(ratio(-72, 125))).unwrap();
        assert_eq!(json, "\"-72/125\"");
        assert_eq!(serde_json::from_str::<W>(&json).unwrap().0, ratio(-72, 125));
    }

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse("0.3").unwrap(), ratio(3, 10));
        assert_eq!(parse("-1.25").unwrap(), ratio(-5, 4));
        assert_eq!(parse("1.5e-3").unwrap(), ratio(3, 2000));
        assert_eq!(parse("72/125").unwrap(), ratio(72, 125));
        assert_eq!(parse("7").unwrap(), ratio(7, 1));
        assert!(parse("abc").is_err());
        assert!(parse("1/0").is_err());
    }

    #[test]
    fn lift_is_exact() {
        assert_eq!(lift(0.5).unwrap(), ratio(1, 2));
        let third = lift(1.0 / 3.0).unwrap();
        assert_ne!(third, ratio(1, 3));
        assert_eq!(to_f64(&third), 1.0 / 3.0);
        assert!(lift(f64::NAN).is_err());
    }

    #[test]
    fn exact_pair_round_trip_for_large_values() {
        let q = BigRational::new(BigInt::from(3).pow(50), BigInt::from(7).pow(40));
        let back = ExactPair::from_rational(&q).to_rational().unwrap();
        assert_eq!(q, back);
    }
}
