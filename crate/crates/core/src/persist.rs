//! Versioned JSON envelope shared by every persisted artifact.
//!
//! Values are routed through `serde_json::Value` so object keys come out
//! sorted, which keeps files byte-stable across runs.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub(crate) fn to_json<T: Serialize>(format: &str, version: u32, body: &T) -> Result<String> {
    let value = json!({
        "format": format,
        "version": version,
        "body": serde_json::to_value(body)?,
    });
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

pub(crate) fn from_json<T: DeserializeOwned>(format: &str, version: u32, text: &str) -> Result<T> {
    let mut value: Value = serde_json::from_str(text)?;
    let found = value
        .get("format")
        .and_then(Value::as_str)
        .unwrap_or("<none>")
        .to_string();
    let found_version = value.get("version").and_then(Value::as_u64).unwrap_or(0) as u32;
    if found != format || found_version != version {
        return Err(Error::VersionMismatch {
            expected: format.to_string(),
            expected_version: version,
            found,
            found_version,
        });
    }
    let body = value
        .get_mut("body")
        .map(Value::take)
        .ok_or_else(|| Error::InvalidModel(format!("{format}: missing body")))?;
    Ok(serde_json::from_value(body)?)
}

/// Reads only the `format` field of a JSON artifact, if present.
pub fn sniff_format(text: &str) -> Option<String> {
    let value: Value = serde_json::from_str(text).ok()?;
    value.get("format")?.as_str().map(str::to_string)
}
