//! Canonical JSON bytes and content digests.
//!
//! Structs serialize their fields in declaration order and maps are
//! `BTreeMap`s, so `serde_json`'s compact writer already yields a canonical
//! single-line form. This module only fixes the entry points.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Compact JSON, no insignificant whitespace.
pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    // Every type passed here has string map keys and no fallible Serialize impl.
    serde_json::to_vec(value).expect("canonical serialization is infallible for dalia types")
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
