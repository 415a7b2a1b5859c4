//! Effective scenario: profile defaults, then the config file, then `--set`
//! overrides, then `--policy`.

use std::path::Path;

use risemf_core::{PolicyKind, Profile, ScenarioConfig};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{CliError, Result};

/// Splits `key=value`, checking the key shape.
pub fn split_override(s: &str) -> Result<(&str, &str)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("malformed override `{s}`: expected key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(|seg| seg.trim().is_empty()) {
        return Err(CliError::usage(format!("malformed override `{s}`: bad key `{key}`")));
    }
    Ok((key, value.trim()))
}

/// A bare word that is not valid TOML is taken as a string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn coerce(new: Value, old: Option<&Value>) -> Value {
    match (new, old) {
        (Value::Integer(i), Some(Value::Float(_))) => Value::Float(i as f64),
        (Value::Array(items), Some(Value::Array(olds))) => {
            let proto = olds.first();
            Value::Array(items.into_iter().map(|v| coerce(v, proto)).collect())
        }
        (v, _) => v,
    }
}

fn set_path(root: &mut Table, key: &str, value: Value) -> Result<()> {
    let segs: Vec<&str> = key.split('.').map(str::trim).collect();
    let (last, parents) = segs.split_last().expect("split_override rejects empty keys");
    let mut table = root;
    for (i, seg) in parents.iter().enumerate() {
        table = match table.get_mut(*seg) {
            Some(Value::Table(t)) => t,
            _ => {
                return Err(CliError::usage(format!(
                    "unknown config key `{}`",
                    segs[..=i].join(".")
                )))
            }
        };
    }
    let value = coerce(value, table.get(*last));
    table.insert(last.to_string(), value);
    Ok(())
}

fn overlay(base: &mut Table, patch: Table, prefix: &str) -> Result<()> {
    for (k, v) in patch {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(p)) => overlay(b, p, &key)?,
            (old, v) => {
                let v = coerce(v, old.as_deref());
                base.insert(k, v);
            }
        }
    }
    Ok(())
}

fn to_table(config: &ScenarioConfig) -> Table {
    Table::try_from(config).expect("scenario config serializes to a TOML table")
}

fn from_table(table: Table, what: &str) -> Result<ScenarioConfig> {
    let text = toml::to_string(&table).map_err(|e| CliError::usage(format!("{what}: {e}")))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("{what}: {}", e.message())))
}

/// Builds the effective configuration.
pub fn load_config(
    profile: Option<Profile>,
    path: Option<&Path>,
    overrides: &[String],
    policy: Option<PolicyKind>,
) -> Result<ScenarioConfig> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read config `{}`: {e}", p.display())))?;
            Some(
                toml::from_str::<Table>(&text)
                    .map_err(|e| CliError::usage(format!("config `{}`: {}", p.display(), e.message())))?,
            )
        }
        None => None,
    };
    let file_profile = match file.as_ref().and_then(|t| t.get("profile")) {
        Some(Value::String(s)) => Some(s.parse::<Profile>().map_err(|e| CliError::usage(e.to_string()))?),
        _ => None,
    };
    let base = ScenarioConfig::profile(profile.or(file_profile).unwrap_or(Profile::Desk));
    let mut table = to_table(&base);
    if let Some(f) = file {
        overlay(&mut table, f, "")?;
        if let Some(p) = profile {
            table.insert("profile".into(), Value::String(format!("{p:?}").to_lowercase()));
        }
        from_table(table.clone(), "config file")?;
    }
    for o in overrides {
        let (key, raw) = split_override(o)?;
        set_path(&mut table, key, parse_value(raw))?;
        from_table(table.clone(), &format!("override `{key}`"))?;
    }
    let mut config = from_table(table, "config")?;
    if let Some(p) = policy {
        config.run.policy = p;
    }
    Ok(config)
}

pub fn to_toml(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("scenario config serializes to TOML")
}

/// SHA-256 of the canonical TOML rendering, hex.
pub fn config_hash(config: &ScenarioConfig) -> String {
    Sha256::digest(to_toml(config).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
