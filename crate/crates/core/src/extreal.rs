//! Extended reals for reports: finite values serialize as numbers,
//! the infinities as the strings "inf" / "-inf".

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtReal(pub f64);

impl ExtReal {
    pub const POS_INF: ExtReal = ExtReal(f64::INFINITY);
    pub const NEG_INF: ExtReal = ExtReal(f64::NEG_INFINITY);

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// CSV field: 12 significant digits, or the inf strings.
    pub fn csv_field(&self) -> String {
        if self.0 == f64::INFINITY {
            "inf".to_string()
        } else if self.0 == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            format_sig12(self.0)
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal(v)
    }
}

/// 12 significant digits.
pub fn format_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            ser.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            ser.serialize_str("-inf")
        } else {
            ser.serialize_f64(self.0)
        }
    }
}

struct ExtRealVisitor;

impl Visitor<'_> for ExtRealVisitor {
    type Value = ExtReal;

    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        write!(f, "a number or \"inf\"/\"-inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtReal, E> {
        Ok(ExtReal(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtReal, E> {
        Ok(ExtReal(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtReal, E> {
        Ok(ExtReal(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtReal, E> {
        match v {
            "inf" => Ok(ExtReal::POS_INF),
            "-inf" => Ok(ExtReal::NEG_INF),
            other => Err(E::custom(format!("unexpected extended-real string `{other}`"))),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<ExtReal, D::Error> {
        de.deserialize_any(ExtRealVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_json() {
        for v in [ExtReal(1.5), ExtReal::POS_INF, ExtReal::NEG_INF, ExtReal(-0.25)] {
            let s = serde_json::to_string(&v).unwrap();
            let back: ExtReal = serde_json::from_str(&s).unwrap();
            assert_eq!(v, back);
        }
        assert_eq!(serde_json::to_string(&ExtReal::POS_INF).unwrap(), "\"inf\"");
    }

    #[test]
    fn csv_fields() {
        assert_eq!(ExtReal::NEG_INF.csv_field(), "-inf");
        assert_eq!(ExtReal(0.5).csv_field(), "5.00000000000e-1");
    }
}
