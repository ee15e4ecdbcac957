//! Canonical content digests.
//!
//! A digest must be stable across field ordering, process runs, and
//! platforms, because it keys the response cache on disk. We serialize
//! through `serde_json::Value`, whose object representation sorts keys,
//! then hash the compact encoding.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// 64-hex-char SHA-256 of the canonical JSON encoding of `value`.
///
/// Two values digest equal iff their JSON trees are equal; map key order
/// in the source struct is irrelevant.
pub fn canonical_digest<T: Serialize>(value: &T) -> String {
    let tree = serde_json::to_value(value).expect("value must be JSON-serializable");
    let encoded = serde_json::to_string(&tree).expect("JSON tree always serializes");
    let mut hasher = Sha256::new();
    hasher.update(encoded.as_bytes());
    hex::encode(hasher.finalize())
}

/// SHA-256 of raw bytes, hex-encoded. Used for image payloads.
pub fn bytes_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}
