//! Exact text encoding of `f64` as C99-style hexadecimal floats.
//!
//! Finite values are written as `0x1.<fraction>p<exp>` (normal) or
//! `0x0.<fraction>p-1022` (subnormal), with the 13 fraction digits trimmed
//! of trailing zeros. Infinities are `inf`/`-inf` and NaN keeps its payload
//! as `nan:0x<bits>`. [`parse`] accepts exactly this canonical form, so
//! every value round-trips bit for bit.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;

const FRACTION_BITS: u32 = 52;
const FRACTION_MASK: u64 = (1 << FRACTION_BITS) - 1;
const EXPONENT_BIAS: i64 = 1023;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseHexFloatError(pub String);

impl fmt::Display for ParseHexFloatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid hex float {:?}", self.0)
    }
}

impl std::error::Error for ParseHexFloatError {}

pub fn format(x: f64) -> String {
    let bits = x.to_bits();
    if x.is_nan() {
        return format!("nan:0x{bits:016x}");
    }
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let biased = ((bits >> FRACTION_BITS) & 0x7ff) as i64;
    let fraction = bits & FRACTION_MASK;
    if biased == 0 && fraction == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 { (0, -1022) } else { (1, biased - EXPONENT_BIAS) };
    let digits = format!("{fraction:013x}");
    let digits = digits.trim_end_matches('0');
    let exp_sign = if exp < 0 { '-' } else { '+' };
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp_sign}{}", exp.abs())
    } else {
        format!("{sign}0x{lead}.{digits}p{exp_sign}{}", exp.abs())
    }
}

pub fn parse(s: &str) -> Result<f64, ParseHexFloatError> {
    let err = || ParseHexFloatError(s.to_string());
    if let Some(hex) = s.strip_prefix("nan:0x") {
        let bits = u64::from_str_radix(hex, 16).map_err(|_| err())?;
        let x = f64::from_bits(bits);
        return if x.is_nan() { Ok(x) } else { Err(err()) };
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let sign_bit = if negative { 1u64 << 63 } else { 0 };
    if body == "inf" {
        return Ok(f64::from_bits(sign_bit | f64::INFINITY.to_bits()));
    }
    let body = body.strip_prefix("0x").ok_or_else(err)?;
    let (mantissa, exponent) = body.split_once('p').ok_or_else(err)?;
    if !exponent.starts_with(['+', '-']) {
        return Err(err());
    }
    let exp: i64 = exponent.parse().map_err(|_| err())?;
    let (lead, digits) = match mantissa.split_once('.') {
        Some((lead, digits)) if !digits.is_empty() => (lead, digits),
        Some(_) => return Err(err()),
        None => (mantissa, ""),
    };
    if digits.len() > 13 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(err());
    }
    let fraction = if digits.is_empty() {
        0
    } else {
        u64::from_str_radix(digits, 16).map_err(|_| err())? << (4 * (13 - digits.len()))
    };
    let bits = match lead {
        "1" => {
            let biased = exp + EXPONENT_BIAS;
            if !(1..=2046).contains(&biased) {
                return Err(err());
            }
            ((biased as u64) << FRACTION_BITS) | fraction
        }
        "0" if fraction == 0 && exp == 0 => 0,
        "0" if fraction != 0 && exp == -1022 => fraction,
        _ => return Err(err()),
    };
    Ok(f64::from_bits(sign_bit | bits))
}

/// `#[serde(with = "hexfloat::single")]` for one `f64`.
pub mod single {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct HexVisitor;
        impl Visitor<'_> for HexVisitor {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a hexadecimal float string")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                parse(v).map_err(E::custom)
            }
        }
        d.deserialize_str(HexVisitor)
    }
}

/// `#[serde(with = "hexfloat::vec")]` for `Vec<f64>`.
pub mod vec {
    use super::*;
    use serde::{Deserialize, Serialize};

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        xs.iter().map(|&x| format(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse(s).map_err(de::Error::custom))
            .collect()
    }
}

/// `#[serde(with = "hexfloat::option_triple")]` for `Option<[f64; 3]>`.
pub mod option_triple {
    use super::*;
    use serde::{Deserialize, Serialize};

    pub fn serialize<S: Serializer>(xs: &Option<[f64; 3]>, s: S) -> Result<S::Ok, S::Error> {
        xs.map(|a| a.map(format)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[f64; 3]>, D::Error> {
        match Option::<[String; 3]>::deserialize(d)? {
            None => Ok(None),
            Some(a) => {
                let mut out = [0.0; 3];
                for (o, s) in out.iter_mut().zip(&a) {
                    *o = parse(s).map_err(de::Error::custom)?;
                }
                Ok(Some(out))
            }
        }
    }
}
