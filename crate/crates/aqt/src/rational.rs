//! Exact rational rates.
//!
//! Injection rates are exact rationals so that boundedness and excess
//! comparisons never involve floating point. On the wire (CLI flags, spec
//! files, reports) a rational is always the string `"num/den"`, or a bare
//! integer for whole values.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

pub type Rational = num_rational::Ratio<i64>;

/// Parse a `"num/den"` (or plain integer) string into a rational.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n = i64::from_str(num.trim()).map_err(|e| format!("bad numerator {num:?}: {e}"))?;
        let d = i64::from_str(den.trim()).map_err(|e| format!("bad denominator {den:?}: {e}"))?;
        if d == 0 {
            return Err("denominator must be nonzero".into());
        }
        Ok(Rational::new(n, d))
    } else {
        let n = i64::from_str(s).map_err(|e| format!("bad rational {s:?}: {e}"))?;
        Ok(Rational::from_integer(n))
    }
}

/// Format a rational as `"num/den"` (or a bare integer for whole values).
pub fn format_rational(r: Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A rational that serializes as a `"num/den"` string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalStr(pub Rational);

impl fmt::Display for RationalStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(self.0))
    }
}

impl From<Rational> for RationalStr {
    fn from(r: Rational) -> Self {
        RationalStr(r)
    }
}

impl Serialize for RationalStr {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rational(self.0))
    }
}

impl<'de> Deserialize<'de> for RationalStr {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        parse_rational(&s)
            .map(RationalStr)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        assert_eq!(parse_rational("1/2").unwrap(), Rational::new(1, 2));
        assert_eq!(parse_rational("3").unwrap(), Rational::from_integer(3));
        assert_eq!(parse_rational("4/2").unwrap(), Rational::from_integer(2));
        assert_eq!(format_rational(Rational::new(1, 3)), "1/3");
        assert_eq!(format_rational(Rational::from_integer(2)), "2");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }
}
