//! On-disk interchange formats.

pub mod corrections;
pub mod detections;
pub mod embeddings;
pub mod iframes;
pub mod mot;
pub mod plan;
pub mod report;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Checks the `version` member before anything else is interpreted.
pub(crate) fn check_version(value: &serde_json::Value, expected: &'static str) -> Result<()> {
    match value.get("version") {
        Some(serde_json::Value::String(v)) if v == expected => Ok(()),
        Some(serde_json::Value::String(v)) => Err(Error::Version {
            expected,
            found: v.clone(),
        }),
        Some(other) => Err(Error::Version {
            expected,
            found: other.to_string(),
        }),
        None => Err(Error::Schema {
            path: "version".into(),
            message: "missing field".into(),
        }),
    }
}

/// Deserializes with the failing field's path in the error.
pub(crate) fn from_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

pub(crate) fn parse_json(text: &str) -> Result<serde_json::Value> {
    serde_json::from_str(text).map_err(|e| Error::Schema {
        path: ".".into(),
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    })
}

pub(crate) fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}
