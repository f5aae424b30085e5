//! `LightSpec` JSON: `{kind, ax, ay, bx?, by?, radius}`.
//!
//! Strict parsing rejects unknown fields; lenient parsing drops them.

use lgtm_core::mask::LightSpecWire;
use lgtm_core::LightSpec;
use serde_json::Value;

use crate::{Error, Result};

const FIELDS: [&str; 6] = ["kind", "ax", "ay", "bx", "by", "radius"];

pub fn parse_light_spec(text: &str, strict: bool) -> Result<LightSpec> {
    from_value(serde_json::from_str(text)?, strict)
}

pub fn from_value(mut value: Value, strict: bool) -> Result<LightSpec> {
    if !strict {
        if let Value::Object(map) = &mut value {
            map.retain(|k, _| FIELDS.contains(&k.as_str()));
        }
    }
    let wire: LightSpecWire = serde_json::from_value(value)?;
    Ok(LightSpec::try_from(wire)?)
}

pub fn to_json(spec: &LightSpec) -> Result<String> {
    serde_json::to_string(spec).map_err(Error::from)
}
