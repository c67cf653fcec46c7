//! Canonical serialization helpers.
//!
//! Everything that is hashed goes through [`to_canonical_json`]: values are
//! first converted into a `serde_json::Value`, whose object maps are ordered,
//! so the rendered text has lexicographically sorted keys and no insignificant
//! whitespace.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn to_canonical_value<T: Serialize + ?Sized>(value: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(value)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub fn sha256_bytes(bytes: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().into()
}
