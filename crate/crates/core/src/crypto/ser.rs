//! Serde adapters writing [`Canonical`] values as lowercase hex strings.
//!
//! Use with `#[serde(with = "crate::crypto::ser::hex_canonical")]` for a
//! single value or `hex_canonical_vec` for a sequence.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

use super::group::Canonical;

pub mod hex_canonical {
    use super::*;

    pub fn serialize<T: Canonical, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(value.encode()))
    }

    pub fn deserialize<'de, T: Canonical, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = hex::decode(&text).map_err(D::Error::custom)?;
        T::decode(&bytes).ok_or_else(|| D::Error::custom("non-canonical group or scalar encoding"))
    }
}

pub mod hex_canonical_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<T: Canonical, S: Serializer>(values: &[T], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&hex::encode(v.encode()))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, T: Canonical, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| {
                let bytes = hex::decode(t).map_err(D::Error::custom)?;
                T::decode(&bytes)
                    .ok_or_else(|| D::Error::custom("non-canonical group or scalar encoding"))
            })
            .collect()
    }
}

pub mod hex_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(value: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(text).map_err(D::Error::custom)
    }
}
