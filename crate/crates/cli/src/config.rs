//! Flat key/value settings resolved from defaults, presets, a config file,
//! `--set` overrides and dedicated flags, in that order.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

/// Where a layer of overrides came from; used in error messages.
#[derive(Debug, Clone, Copy)]
pub enum Origin {
    Preset,
    File,
    Set,
    Flag,
}

impl Origin {
    fn describe(self) -> &'static str {
        match self {
            Origin::Preset => "preset",
            Origin::File => "config file",
            Origin::Set => "--set",
            Origin::Flag => "command-line flag",
        }
    }
}

pub type Layer = Vec<(String, String)>;

/// Reads a flat TOML document. Strings, numbers, booleans and arrays of those
/// are accepted; arrays become comma-separated lists.
pub fn parse_config(text: &str) -> Result<Layer, Failure> {
    let table: toml::Table = text.parse().map_err(|e| Failure::Config(format!("cannot parse config: {e}")))?;
    let mut out = Vec::new();
    for (key, value) in table {
        out.push((key.clone(), flatten(&key, &value)?));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Layer, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

fn flatten(key: &str, value: &toml::Value) -> Result<String, Failure> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => {
            let parts = items
                .iter()
                .map(|v| match v {
                    toml::Value::Array(_) | toml::Value::Table(_) => {
                        Err(Failure::Config(format!("'{key}': nested arrays are not supported")))
                    }
                    other => flatten(key, other),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(parts.join(","))
        }
        toml::Value::Datetime(d) => Ok(d.to_string()),
        toml::Value::Table(_) => Err(Failure::Config(format!("'{key}': tables are not supported, the config is flat"))),
    }
}

/// Splits `key=value` from `--set`.
pub fn parse_assignment(s: &str) -> Result<(String, String), Failure> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("--set expects key=value, got '{s}'")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Resolved settings of one subcommand. Only keys present in the defaults exist.
#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(defaults: &[(&str, &str)]) -> Self {
        Self { values: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    pub fn apply(&mut self, layer: &[(String, String)], origin: Origin) -> Result<(), Failure> {
        for (k, v) in layer {
            match self.values.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => {
                    let known: Vec<&str> = self.values.keys().map(String::as_str).collect();
                    return Err(Failure::Config(format!(
                        "unknown key '{k}' from {} (known keys: {})",
                        origin.describe(),
                        known.join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("no default for '{key}'"))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        parse_value(key, self.str(key))
    }

    /// A comma-separated list; empty for an empty value.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        split_list(self.str(key)).map(|item| parse_value(key, item)).collect()
    }

    pub fn strings(&self, key: &str) -> Vec<String> {
        split_list(self.str(key)).map(String::from).collect()
    }

    /// `auto` (or empty) maps to `None`.
    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        match self.str(key) {
            "" | "auto" => Ok(None),
            v => parse_value(key, v).map(Some),
        }
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse().map_err(|e| Failure::Config(format!("'{key}' = '{raw}': {e}")))
}
