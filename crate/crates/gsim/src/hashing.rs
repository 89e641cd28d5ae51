//! Stable content hashing for config-keyed caches and checkpoints.

use serde::Serialize;

/// FNV-1a over a canonical JSON serialization. Stable across runs and
/// platforms for a fixed struct layout; not cryptographic.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in json.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
