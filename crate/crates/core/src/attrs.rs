//! The catch-all attribute map and its canonical serialized form.
//!
//! Every `data` column holds one of these maps. Serialization is a JSON
//! object with keys in sorted order, so equal maps always produce equal
//! bytes and change detection can compare text.

use std::collections::BTreeMap;

pub type Attributes = BTreeMap<String, String>;

/// Keys starting with this prefix are reserved for fields the engine itself
/// folds into an attribute map (e.g. `@provenance`).
pub const RESERVED_PREFIX: char = '@';

pub fn serialize(attrs: &Attributes) -> String {
    // BTreeMap iterates in key order; serde_json keeps that order.
    serde_json::to_string(attrs).expect("string map always serializes")
}

pub fn deserialize(text: &str) -> Result<Attributes, serde_json::Error> {
    if text.is_empty() {
        return Ok(Attributes::new());
    }
    serde_json::from_str(text)
}
