//! Exact rational helpers: parsing and formatting of `"p/q"` strings.
//!
//! Rationals cross every serialization boundary as strings so that no decimal
//! rounding can sneak in. Decimal literals are rejected on purpose.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Parses `"p/q"` or a bare integer `"p"`. Decimal notation is rejected.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if s.contains(['.', 'e', 'E']) {
        return Err(Error::Parse(format!(
            "decimal notation is not accepted for exact values, use p/q: {s:?}"
        )));
    }
    let (num_s, den_s) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num_s
        .parse()
        .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
    let den: BigInt = den_s
        .parse()
        .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(num, den))
}

/// Formats a rational as `"p/q"`, or `"p"` when the denominator is one.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_u64(n: u64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_ratio(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Lossy conversion for reporting; exact values stay rational internally.
pub fn rat_to_f64(r: &Rat) -> f64 {
    num::ToPrimitive::to_f64(r).unwrap_or_else(|| {
        // Fall back to a scaled division when the parts overflow f64.
        let bits = r.numer().bits().max(r.denom().bits());
        let shift = bits.saturating_sub(900);
        let num = r.numer().abs() >> shift;
        let den = r.denom().abs() >> shift;
        let v = num.to_string().parse::<f64>().unwrap_or(f64::NAN)
            / den.to_string().parse::<f64>().unwrap_or(f64::NAN);
        if r.is_negative() {
            -v
        } else {
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["1/3", "0", "-7/2", "4", "123456789123456789/987654321"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(parse_rat(&format_rat(&r)).unwrap(), r);
        }
        assert_eq!(parse_rat("2/4").unwrap(), rat_ratio(1, 2));
    }

    #[test]
    fn rejects_decimals_and_garbage() {
        assert!(parse_rat("0.5").is_err());
        assert!(parse_rat("1e-3").is_err());
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("").is_err());
        assert!(parse_rat("a/b").is_err());
    }
}
