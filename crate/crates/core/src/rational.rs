//! Exact rational quantities: resource capacities, demands, register payloads
//! and coordination-tax arithmetic.
//!
//! On the wire a rational is either a JSON integer, a JSON number with a
//! finite decimal expansion, or a string of the form `"7"`, `"3/4"` or
//! `"0.26"`. Serialization is canonical: integers as JSON integers, anything
//! else as a reduced `"n/d"` string.

use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal '{0}'")]
pub struct ParseRationalError(pub String);

/// Parses `"n"`, `"n/d"` or a decimal literal such as `"-0.125"` exactly.
pub fn parse(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| err())?;
        let d: i128 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: i128 = if all.is_empty() { 0 } else { all.parse().map_err(|_| err())? };
    let scale = exponent - frac_part.len() as i32;
    if scale.unsigned_abs() > 30 {
        return Err(err());
    }
    let pow = 10i128.checked_pow(scale.unsigned_abs()).ok_or_else(err)?;
    let value = if scale >= 0 {
        Rational::from_integer(numer.checked_mul(pow).ok_or_else(err)?)
    } else {
        Rational::new(numer, pow)
    };
    Ok(if negative { -value } else { value })
}

/// Canonical text: `"7"` for integers, `"3/4"` otherwise.
pub fn to_text(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    // i128 -> f64 loses precision only beyond 2^53, far above any value used here
    *value.numer() as f64 / *value.denom() as f64
}

/// Decimal rendering with `places` fractional digits, rounded half-to-even.
pub fn to_decimal(value: &Rational, places: u32) -> String {
    let scale = 10i128.pow(places);
    let scaled = value * Rational::from_integer(scale);
    let rounded = round_half_even(&scaled);
    let negative = rounded.is_negative();
    let abs = rounded.abs();
    let int = abs / scale;
    let frac = abs % scale;
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac:0width$}", width = places as usize)
    }
}

/// Rounds to the nearest integer; exact ties go to the even neighbour.
pub fn round_half_even(value: &Rational) -> i128 {
    let floor = value.floor();
    let diff = value - floor;
    let half = Rational::new(1, 2);
    let base = *floor.numer();
    if diff > half || (diff == half && base.rem_euclid(2) != 0) {
        base + 1
    } else {
        base
    }
}

/// Percentage with `places` decimals (half-to-even), e.g. `57` or `73.8`.
pub fn to_percent(value: &Rational, places: u32) -> String {
    to_decimal(&(value * Rational::from_integer(100)), places)
}

pub fn is_negative(value: &Rational) -> bool {
    value < &Rational::zero()
}

pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
    if value.is_integer() {
        if let Some(n) = value.numer().to_i64() {
            return serializer.serialize_i64(n);
        }
    }
    serializer.serialize_str(&to_text(value))
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
    deserializer.deserialize_any(RationalVisitor)
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or a rational string like \"3/4\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::from_integer(v as i128))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational::from_integer(v as i128))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        // shortest round-trip representation, then exact decimal parse
        parse(&format!("{v}")).map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        parse(v).map_err(E::custom)
    }
}

/// Serde adapter for `Vec`/`BTreeMap` values and other nested positions.
pub mod map_values {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Rational;

    #[derive(serde::Serialize, Deserialize)]
    struct Wrapped(
        #[serde(serialize_with = "super::serialize", deserialize_with = "super::deserialize")]
        Rational,
    );

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<String, Rational>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let mut out = serializer.serialize_map(Some(map.len()))?;
        for (k, v) in map {
            out.serialize_entry(k, &Wrapped(*v))?;
        }
        out.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<String, Rational>, D::Error> {
        let raw = BTreeMap::<String, Wrapped>::deserialize(deserializer)?;
        Ok(raw.into_iter().map(|(k, Wrapped(v))| (k, v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integer_fraction_and_decimal_forms() {
        assert_eq!(parse("50").unwrap(), Rational::from_integer(50));
        assert_eq!(parse("3/4").unwrap(), Rational::new(3, 4));
        assert_eq!(parse("0.26").unwrap(), Rational::new(13, 50));
        assert_eq!(parse("-1.5").unwrap(), Rational::new(-3, 2));
        assert_eq!(parse("4.4").unwrap(), Rational::new(22, 5));
        assert_eq!(parse("1e-6").unwrap(), Rational::new(1, 1_000_000));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("").is_err());
        assert!(parse(".").is_err());
    }

    #[test]
    fn rounding_is_half_to_even() {
        assert_eq!(round_half_even(&Rational::new(5, 2)), 2);
        assert_eq!(round_half_even(&Rational::new(7, 2)), 4);
        assert_eq!(round_half_even(&Rational::new(-5, 2)), -2);
        assert_eq!(round_half_even(&Rational::new(26, 10)), 3);
        assert_eq!(to_percent(&Rational::new(48, 65), 1), "73.8");
        assert_eq!(to_percent(&Rational::new(4, 7), 0), "57");
        assert_eq!(to_decimal(&Rational::new(1, 8), 2), "0.12");
    }

    #[test]
    fn json_numbers_are_read_exactly() {
        #[derive(serde::Deserialize)]
        struct Probe(#[serde(deserialize_with = "deserialize")] Rational);
        let Probe(v) = serde_json::from_str("0.1").unwrap();
        assert_eq!(v, Rational::new(1, 10));
        let Probe(v) = serde_json::from_str("\"2/6\"").unwrap();
        assert_eq!(v, Rational::new(1, 3));
    }
}
