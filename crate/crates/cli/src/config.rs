//! Config file loading, dotted overrides and unknown-key detection.

use std::path::Path;

use rmt_eth_lab::experiments::ExperimentConfig;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Read the config file (or start from `{}`), apply overrides, reject unknown
/// keys and validate.
pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, Failure> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("config {} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !value.is_object() {
        return Err(Failure::Usage("config must be a JSON object".into()));
    }
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let defaults = serde_json::to_value(ExperimentConfig::default()).expect("defaults serialize");
    let mut unknown = Vec::new();
    unknown_keys(&value, &defaults, "", &mut unknown);
    if !unknown.is_empty() {
        return Err(Failure::Usage(format!("unknown config key(s): {}", unknown.join(", "))));
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value)
        .map_err(|e| Failure::Usage(format!("{}: {}", e.path(), e.inner())))?;
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

/// `a.b.c=value`; the value is parsed as JSON and falls back to a string.
fn apply_override(root: &mut Value, spec: &str) -> Result<(), Failure> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("override '{spec}' is not of the form key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Failure::Usage(format!("override '{spec}' has an empty key segment")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Failure::Usage(format!("override '{key}' descends into a non-object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
    }
    node.as_object_mut()
        .ok_or_else(|| Failure::Usage(format!("override '{key}' descends into a non-object")))?
        .insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

/// Keys of `value` absent from `defaults`. Tagged objects (with a `kind`) are
/// left to the deserializer, which knows the variant's fields.
fn unknown_keys(value: &Value, defaults: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Some(obj), Some(def)) = (value.as_object(), defaults.as_object()) else {
        return;
    };
    if def.contains_key("kind") {
        return;
    }
    for (k, v) in obj {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match def.get(k) {
            None => out.push(path),
            Some(d) => unknown_keys(v, d, &path, out),
        }
    }
}

/// SHA-256 of the canonical (sorted-key, compact) JSON of the resolved config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_value(cfg).expect("config serializes");
    let text = serde_json::to_string(&canonical).expect("config serializes");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}
