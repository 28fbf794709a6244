//! Flag/config-file merging, validation helpers and the resolved-config hash.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Overlays `flags` on the optional config file and deserializes the result.
///
/// Flags that were given win over file entries; unknown keys in the file are
/// rejected by the target type.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Path>) -> CliResult<T> {
    let Some(path) = file else {
        return serde_json::from_value(to_value(flags)?).map_err(|e| CliError::config("flags", e));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    let from_file: Value = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => {
            let t: toml::Value = toml::from_str(&text)
                .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
            if let Some(key) = non_finite_key(&t, "") {
                return Err(CliError::config(&key, "must be finite"));
            }
            serde_json::to_value(t).map_err(|e| CliError::config("config", e))?
        }
        Some("json") => serde_json::from_str(&text)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?,
        _ => {
            return Err(CliError::config(
                "config",
                format!("{} must end in .toml or .json", path.display()),
            ))
        }
    };
    let mut merged = from_file;
    overlay(&mut merged, to_value(flags)?);
    serde_json::from_value(merged).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))
}

/// Path of the first NaN or infinite float, which JSON cannot carry.
fn non_finite_key(v: &toml::Value, prefix: &str) -> Option<String> {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        toml::Value::Float(x) if !x.is_finite() => Some(prefix.to_string()),
        toml::Value::Table(t) => t.iter().find_map(|(k, v)| non_finite_key(v, &join(k))),
        toml::Value::Array(a) => a.iter().find_map(|v| non_finite_key(v, prefix)),
        _ => None,
    }
}

/// Value parser for float flags.
pub fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Output(e.to_string()))
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => {
            if !t.is_null() {
                *b = t;
            }
        }
    }
}

/// Unwraps a parameter that has no default.
pub fn required<T>(v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::config(key, "missing (pass the flag or set it in the config file)"))
}

pub fn check_p(p: f64, key: &str, strict: bool) -> CliResult<f64> {
    if !p.is_finite() {
        return Err(CliError::config(key, "must be finite"));
    }
    if strict && !(p > 2.0) {
        return Err(CliError::config(key, format!("must exceed 2, got {p}")));
    }
    if !(p >= 2.0) {
        return Err(CliError::config(key, format!("must be at least 2, got {p}")));
    }
    Ok(p)
}

pub fn check_n(n: usize) -> CliResult<usize> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(CliError::config("n", format!("must be an even integer >= 4, got {n}")));
    }
    Ok(n)
}

/// sha256 of the canonical JSON form of a resolved configuration.
pub fn config_hash<T: Serialize>(resolved: &T) -> String {
    let canonical = serde_json::to_string(resolved).expect("resolved config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// sha256 of an input file, so that resolved configs pin their inputs.
pub fn file_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Lattice position `i,j` of a grid node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticePoint(pub usize, pub usize);

impl FromStr for LatticePoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (i, j) = s.split_once(',').ok_or_else(|| format!("expected `i,j`, got `{s}`"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a lattice index"));
        Ok(LatticePoint(parse(i)?, parse(j)?))
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

impl Serialize for LatticePoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
