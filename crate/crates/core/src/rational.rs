//! Exact rational arithmetic helpers.
//!
//! Quorums, USD amounts and percentages are all exact `Ratio<i128>` values.
//! Configuration documents carry them as decimal or `p/q` strings so no
//! binary floating point is ever involved.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Fraction = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?}")]
pub struct ParseFractionError(pub String);

/// Parse `"0.65"`, `"13/20"`, `"-2"` or `"2.3"` into an exact fraction.
pub fn parse_fraction(s: &str) -> Result<Fraction, ParseFractionError> {
    let err = || ParseFractionError(s.to_string());
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| err())?;
        let d: i128 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Fraction::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    if frac_part.len() > 30 {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| err())? };
    let denom = 10i128.pow(frac_part.len() as u32);
    let v = Fraction::new(numer, denom);
    Ok(if neg { -v } else { v })
}

/// Render with exactly `places` decimals, rounding half away from zero.
pub fn format_fixed(v: &Fraction, places: u32) -> String {
    let scale = 10i128.pow(places);
    let scaled = v * Fraction::from_integer(scale);
    let (q, r) = scaled.numer().div_rem(scaled.denom());
    let twice = r.abs() * 2;
    let mut units = q;
    if twice >= *scaled.denom() {
        units += if scaled.is_negative() { -1 } else { 1 };
    }
    let neg = units < 0;
    let units = units.abs();
    let int = units / scale;
    let frac = units % scale;
    let sign = if neg { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac:0width$}", width = places as usize)
    }
}

/// Truncate toward zero.
pub fn trunc_to_int(v: &Fraction) -> i128 {
    v.numer() / v.denom()
}

/// Smallest integer not below `v`.
pub fn ceil_to_int(v: &Fraction) -> i128 {
    v.ceil().to_integer()
}

/// Serde adapter storing a [`Fraction`] as a decimal or `p/q` string.
pub mod serde_fraction {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Fraction, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&display(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Fraction, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Lit {
            Int(i64),
            Str(String),
        }
        match Lit::deserialize(d)? {
            Lit::Int(i) => Ok(Fraction::from_integer(i as i128)),
            Lit::Str(s) => parse_fraction(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Same as [`serde_fraction`] for a list of fractions.
pub mod serde_fraction_vec {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "serde_fraction")] Fraction);

    pub fn serialize<S: Serializer>(v: &[Fraction], s: S) -> Result<S::Ok, S::Error> {
        let w: Vec<Wrap> = v.iter().copied().map(Wrap).collect();
        w.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Fraction>, D::Error> {
        let w: Vec<Wrap> = Vec::deserialize(d)?;
        Ok(w.into_iter().map(|w| w.0).collect())
    }
}

/// Canonical short display: an integer, a terminating decimal, or `p/q`.
pub fn display(v: &Fraction) -> String {
    DisplayFraction(v).to_string()
}

struct DisplayFraction<'a>(&'a Fraction);

impl fmt::Display for DisplayFraction<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        if v.is_integer() {
            return write!(f, "{}", v.to_integer());
        }
        // terminating decimal iff the reduced denominator is 2^a 5^b
        let mut d = *v.denom();
        let mut places = 0u32;
        while d % 10 == 0 || d % 2 == 0 || d % 5 == 0 {
            if d % 10 == 0 {
                d /= 10;
            } else if d % 2 == 0 {
                d /= 2;
            } else {
                d /= 5;
            }
            places += 1;
            if places > 30 {
                break;
            }
        }
        if d == 1 && places <= 30 {
            let s = format_fixed(v, places);
            let trimmed = s.trim_end_matches('0').trim_end_matches('.');
            f.write_str(trimmed)
        } else if v.is_zero() {
            f.write_str("0")
        } else {
            write!(f, "{}/{}", v.numer(), v.denom())
        }
    }
}
