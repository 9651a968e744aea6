//! Bit-exact hexadecimal float literals (`-0x1.8000000000000p+1`).
//!
//! The formatter always emits 13 fraction digits; the parser accepts the
//! same grammar with 0 to 13 fraction digits and rejects everything else,
//! including infinities and NaN.

use crate::error::{Error, Result};

pub fn format_hex(x: f64) -> String {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0x7ff {
        // not representable in the grammar; callers only pass finite values
        return if frac == 0 { format!("{sign}inf") } else { "nan".into() };
    }
    if exp == 0 {
        if frac == 0 {
            format!("{sign}0x0.0000000000000p+0")
        } else {
            format!("{sign}0x0.{frac:013x}p-1022")
        }
    } else {
        let e = exp - 1023;
        let esign = if e < 0 { '-' } else { '+' };
        format!("{sign}0x1.{frac:013x}p{esign}{}", e.abs())
    }
}

pub fn parse_hex(s: &str) -> Result<f64> {
    let err = |m: &str| Error::Parse(format!("bad hex float `{}`: {m}", truncate(s)));
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let rest = rest
        .strip_prefix("0x")
        .or_else(|| rest.strip_prefix("0X"))
        .ok_or_else(|| err("missing 0x prefix"))?;
    let (mant, exp) = rest.split_once(['p', 'P']).ok_or_else(|| err("missing exponent"))?;
    let (lead, frac_digits) = match mant.split_once('.') {
        Some((l, f)) => (l, f),
        None => (mant, ""),
    };
    let lead = match lead {
        "0" => 0u64,
        "1" => 1u64,
        _ => return Err(err("leading digit must be 0 or 1")),
    };
    if frac_digits.len() > 13 {
        return Err(err("more than 13 fraction digits"));
    }
    let mut frac = 0u64;
    for c in frac_digits.chars() {
        let v = c.to_digit(16).ok_or_else(|| err("invalid hex digit"))?;
        frac = (frac << 4) | v as u64;
    }
    frac <<= 4 * (13 - frac_digits.len());
    let exp_body = exp.strip_prefix(['+', '-']).unwrap_or(exp);
    if exp_body.is_empty() || exp_body.len() > 5 || !exp_body.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err("invalid exponent"));
    }
    let e: i64 = exp.parse().map_err(|_| err("invalid exponent"))?;
    let bits = if lead == 1 {
        let biased = e + 1023;
        if !(1..=2046).contains(&biased) {
            return Err(err("exponent out of range"));
        }
        ((biased as u64) << 52) | frac
    } else if frac == 0 {
        0
    } else {
        if e != -1022 {
            return Err(err("subnormal literal must use exponent -1022"));
        }
        frac
    };
    let sign = if neg { 1u64 << 63 } else { 0 };
    Ok(f64::from_bits(sign | bits))
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(40) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Serde adapter for `f64` fields stored as hex literals.
pub mod serde_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_hex(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_hex(&s).map_err(serde::de::Error::custom)
    }
}
