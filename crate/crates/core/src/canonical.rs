//! Canonical JSON encoding: object keys sorted, shortest round-trip float
//! formatting, UTF-8, single line.
//!
//! Going through `serde_json::Value` sorts keys because the default map is
//! a BTreeMap; compact output keeps everything on one line.

use serde::Serialize;

/// Serializes any value to its canonical JSON byte form.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    serde_json::to_string(&v)
}
