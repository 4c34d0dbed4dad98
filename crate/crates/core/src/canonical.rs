//! Canonical JSON encoding and content digests.
//!
//! Canonical form: object keys sorted, no insignificant whitespace, UTF-8,
//! floats rounded to 12 significant digits. Encoding a value, parsing it back
//! and encoding again yields the same bytes.

use serde::Serialize;
use serde_json::{Number, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Significant digits kept for every floating-point number.
pub const FLOAT_DIGITS: usize = 12;

/// Hex digest used as the "previous" link of the first record in a chain.
pub const ZERO_DIGEST: &str = "0000000000000000000000000000000000000000000000000000000000000000";

/// Serializes `value` to canonical JSON.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&value, &mut out)?;
    Ok(out)
}

/// Serializes `value` to canonical JSON bytes.
pub fn to_canonical_vec<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    to_canonical_string(value).map(String::into_bytes)
}

/// SHA-256 of the canonical serialization, as lowercase hex.
pub fn digest_of<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(sha256_hex(&to_canonical_vec(value)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// True when `s` is a 64-character lowercase hex digest.
pub fn is_hex_digest(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Formats a float with [`FLOAT_DIGITS`] significant digits.
///
/// Integral values keep a trailing `.0`; very large or very small magnitudes
/// use exponent notation.
pub fn format_float(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::data(format!("cannot encode non-finite number {x}")));
    }
    let rounded: f64 = format!("{:.*e}", FLOAT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    if rounded == 0.0 {
        return Ok("0.0".to_string());
    }
    let magnitude = rounded.abs();
    if (1e-6..1e15).contains(&magnitude) {
        let s = format!("{rounded}");
        if s.contains('.') {
            Ok(s)
        } else {
            Ok(format!("{s}.0"))
        }
    } else {
        Ok(format!("{rounded:e}"))
    }
}

fn write_number(n: &Number, out: &mut String) -> Result<()> {
    if let Some(u) = n.as_u64() {
        out.push_str(&u.to_string());
    } else if let Some(i) = n.as_i64() {
        out.push_str(&i.to_string());
    } else {
        let f = n.as_f64().ok_or_else(|| Error::data("unrepresentable number"))?;
        out.push_str(&format_float(f)?);
    }
    Ok(())
}

fn write_value(value: &Value, out: &mut String) -> Result<()> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out)?,
        Value::String(s) => out.push_str(&serde_json::to_string(s)?),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key)?);
                out.push(':');
                write_value(&map[key], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn floats_keep_twelve_digits() {
        assert_eq!(format_float(3.0).unwrap(), "3.0");
        assert_eq!(format_float(0.1 + 0.2).unwrap(), "0.3");
        assert_eq!(format_float(1.0 / 3.0).unwrap(), "0.333333333333");
        assert_eq!(format_float(-2.5e-9).unwrap(), "-2.5e-9");
        assert_eq!(format_float(-0.0).unwrap(), "0.0");
        assert!(format_float(f64::INFINITY).is_err());
    }

    #[test]
    fn keys_are_sorted() {
        let mut m = BTreeMap::new();
        m.insert("zeta", 1);
        m.insert("alpha", 2);
        #[derive(Serialize)]
        struct S {
            z: u8,
            a: BTreeMap<&'static str, i32>,
        }
        let s = to_canonical_string(&S { z: 1, a: m }).unwrap();
        assert_eq!(s, r#"{"a":{"alpha":2,"zeta":1},"z":1}"#);
    }

    #[test]
    fn digests_are_hex() {
        let d = digest_of(&vec![1, 2, 3]).unwrap();
        assert!(is_hex_digest(&d));
        assert!(is_hex_digest(ZERO_DIGEST));
        assert!(!is_hex_digest(&d.to_uppercase()));
    }

    proptest! {
        #[test]
        fn float_encoding_is_idempotent(x in -1e18f64..1e18) {
            let once = format_float(x).unwrap();
            let parsed: f64 = once.parse().unwrap();
            prop_assert_eq!(format_float(parsed).unwrap(), once);
        }
    }
}
