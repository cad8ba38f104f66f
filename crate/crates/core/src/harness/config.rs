//! Flat `key = value` configuration files.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Parses `key = value` lines. Blank lines and `#` comments are ignored;
/// keys are normalised to use `-` instead of `_`.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::invalid(format!("config line {}: empty key", n + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::invalid(format!("config line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(out)
}

pub fn load(path: &std::path::Path) -> Result<BTreeMap<String, String>> {
    parse(&std::fs::read_to_string(path)?)
}

/// Typed lookup; a present but unparsable value is a config error.
pub fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("config key `{key}`: cannot parse `{v}`"))),
    }
}
