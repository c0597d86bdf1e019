//! JSON stage configs with dotted-key overrides such as
//! `optim.lr=2e-4` or `model.axes.d=false`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Parses `key.path=value`. The value is read as JSON when possible and as a
/// plain string otherwise.
pub fn parse_override(s: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))?;
    let path: Vec<String> = key.split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} has an empty segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path, value))
}

/// Sets an existing key; unknown keys are an error.
pub fn apply_override(doc: &mut Value, path: &[String], value: Value) -> Result<()> {
    let mut cur = doc;
    for (i, seg) in path.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override key {} is not an object path", path[..i].join(".")))
        })?;
        let next = obj
            .get_mut(seg)
            .ok_or_else(|| Error::Config(format!("unknown config key {}", path[..=i].join("."))))?;
        cur = next;
    }
    *cur = value;
    Ok(())
}

/// Starts from `T::default()`, merges the JSON file (if any) over it, then
/// applies the overrides and deserializes.
pub fn load<T: Serialize + DeserializeOwned + Default>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            load_bytes(Some(&bytes), overrides).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                other => other,
            })
        }
        None => load_bytes(None, overrides),
    }
}

/// [`load`] with the file contents already in memory.
pub fn load_bytes<T: Serialize + DeserializeOwned + Default>(file: Option<&[u8]>, overrides: &[String]) -> Result<T> {
    let mut doc = serde_json::to_value(T::default())?;
    if let Some(bytes) = file {
        let file: Value = serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut doc, file, &mut Vec::new())?;
    }
    for o in overrides {
        let (path, value) = parse_override(o)?;
        apply_override(&mut doc, &path, value)?;
    }
    serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
}

fn merge(base: &mut Value, over: Value, at: &mut Vec<String>) -> Result<()> {
    match (base, over) {
        // A different `kind` tag selects another enum variant; take it whole.
        (Value::Object(b), Value::Object(o)) if o.get("kind").map_or(false, |k| b.get("kind") != Some(k)) => {
            *b = o;
            Ok(())
        }
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                at.push(k.clone());
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, at)?,
                    None => return Err(Error::Config(format!("unknown config key {}", at.join(".")))),
                }
                at.pop();
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}
