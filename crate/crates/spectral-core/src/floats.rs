//! Serde helpers that keep every `f64` round-trippable through JSON.
//!
//! Finite values serialize as plain JSON numbers (shortest representation
//! that parses back to the same bits). Non-finite values, which JSON cannot
//! represent, serialize as the strings `"inf"`, `"-inf"`, `"nan"` and parse
//! back to the corresponding IEEE values. Bounds flagged as vacuous carry
//! infinities, so reports must survive this round trip bit-exactly.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use std::fmt;

struct TotalF64Visitor;

impl<'de> Visitor<'de> for TotalF64Visitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON number or one of \"inf\", \"-inf\", \"nan\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        match v {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(de::Error::invalid_value(de::Unexpected::Str(other), &self)),
        }
    }
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(TotalF64Visitor)
}

/// Same codec for `Option<f64>`.
pub mod opt {
    use super::TotalF64Visitor;
    use serde::de::{self, Deserializer, Visitor};
    use serde::ser::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    struct OptVisitor;

    impl<'de> Visitor<'de> for OptVisitor {
        type Value = Option<f64>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("null, a JSON number, or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_none<E: de::Error>(self) -> Result<Self::Value, E> {
            Ok(None)
        }

        fn visit_unit<E: de::Error>(self) -> Result<Self::Value, E> {
            Ok(None)
        }

        fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Self::Value, D::Error> {
            d.deserialize_any(TotalF64Visitor).map(Some)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        d.deserialize_option(OptVisitor)
    }
}

/// Format an `f64` for CSV cells: shortest round-trip form, with `inf`,
/// `-inf`, `nan` spelled out.
pub fn csv_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".to_owned()
    } else if v > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Holder {
        #[serde(with = "crate::floats")]
        x: f64,
        #[serde(with = "crate::floats::opt")]
        y: Option<f64>,
    }

    #[test]
    fn non_finite_round_trip() {
        for x in [1.5, f64::INFINITY, f64::NEG_INFINITY, f64::NAN, 1e-308] {
            let h = Holder { x, y: Some(x) };
            let s = serde_json::to_string(&h).unwrap();
            let back: Holder = serde_json::from_str(&s).unwrap();
            assert_eq!(back.x.to_bits(), x.to_bits());
            assert_eq!(back.y.unwrap().to_bits(), x.to_bits());
        }
        let h = Holder { x: 0.0, y: None };
        let s = serde_json::to_string(&h).unwrap();
        let back: Holder = serde_json::from_str(&s).unwrap();
        assert!(back.y.is_none());
    }
}
