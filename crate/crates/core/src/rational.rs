//! Exact rational helpers.
//!
//! Every fraction in the crate (split weights, storage fractions, rates) is a
//! `Ratio<i128>`. On the wire they are always written as `"p/q"`, including
//! integers (`"1/1"`), so that no consumer ever has to guess at a decimal.

use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

pub fn int(value: i128) -> Rational {
    Rational::from_integer(value)
}

pub fn frac(numer: i128, denom: i128) -> Rational {
    Rational::new(numer, denom)
}

/// Always `p/q`, even for integers.
pub fn format(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Accepts `p/q`, `p`, or surrounding whitespace.
pub fn parse(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::Parse(format!("expected rational 'p/q', got {text:?}"));
    match text.split_once('/') {
        Some((p, q)) => {
            let p = i128::from_str(p.trim()).map_err(|_| bad())?;
            let q = i128::from_str(q.trim()).map_err(|_| bad())?;
            if q == 0 {
                return Err(Error::Parse(format!("zero denominator in {text:?}")));
            }
            Ok(Rational::new(p, q))
        }
        None => i128::from_str(text).map(int).map_err(|_| bad()),
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    value.numer().to_f64().unwrap_or(f64::NAN) / value.denom().to_f64().unwrap_or(f64::NAN)
}

pub fn is_integer(value: &Rational) -> bool {
    value.is_integer()
}

/// Converts a non-negative integral rational to `usize`.
pub fn to_usize(value: &Rational) -> Option<usize> {
    if value.is_integer() && !value.is_negative() {
        value.to_integer().to_usize()
    } else {
        None
    }
}

pub fn sum<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    values.into_iter().fold(Rational::zero(), |acc, v| acc + v)
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> i128 {
    values
        .into_iter()
        .fold(i128::one(), |acc, v| acc.lcm(v.denom()))
}

/// `serde(with = ...)` adaptor writing a single rational as `"p/q"`.
pub mod serde_str {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Rational;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// `serde(with = ...)` adaptor for a list of rationals.
pub mod serde_str_vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Rational;

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&super::format(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| super::parse(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// `serde(with = ...)` adaptor for an optional rational.
pub mod serde_str_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Rational;

    pub fn serialize<S: Serializer>(value: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&super::format(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let text = Option::<String>::deserialize(d)?;
        text.map(|t| super::parse(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse("3/5").unwrap(), frac(3, 5));
        assert_eq!(parse(" 6/10 ").unwrap(), frac(3, 5));
        assert_eq!(parse("2").unwrap(), int(2));
        assert_eq!(format(&int(1)), "1/1");
        assert_eq!(format(&frac(4, 7)), "4/7");
        assert!(parse("1/0").is_err());
        assert!(parse("0.5").is_err());
    }

    #[test]
    fn common_denominator_of_weights() {
        let w = [frac(1, 4), frac(1, 6), frac(7, 12)];
        assert_eq!(common_denominator(&w), 12);
    }
}
