//! Serialization of floats as 17-significant-digit decimals.
//!
//! 17 significant digits round-trip every `f64` exactly, and a fixed width
//! keeps CSV and JSON artifacts byte-stable across platforms.

use serde::ser::{SerializeSeq, Serializer};
use serde_json::value::RawValue;

/// Format `x` with 17 significant digits in scientific notation.
pub fn format(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

fn raw(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { format(x) } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&raw(*x), s)
}

pub fn serialize_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        seq.serialize_element(&raw(x))?;
    }
    seq.end()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, -2.5e-300, 6.468283973107361, 0.0] {
            let s = format(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
        }
    }
}
