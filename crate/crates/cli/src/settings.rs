//! Layered `key = value` settings: defaults, then files, then `--set`
//! overrides, then dedicated flags.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use toml::{Table, Value};

/// Reads a flat TOML file. Relative `*_file` paths are taken relative to the
/// file's own directory.
pub fn read_table(path: &Path) -> anyhow::Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| anyhow!("{}: {}", path.display(), e.message()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for (key, value) in table.iter_mut() {
        if let (true, Value::String(s)) = (key.ends_with("_file"), &*value) {
            let p = PathBuf::from(s);
            if p.is_relative() {
                *value = Value::String(base.join(p).to_string_lossy().into_owned());
            }
        }
    }
    Ok(table)
}

/// Parses `key=value`. The value is read as a TOML literal when it is one,
/// as a list of strings when it holds commas, and as a plain string
/// otherwise.
pub fn parse_override(raw: &str) -> anyhow::Result<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{raw}` is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(anyhow!("override `{raw}` has an empty key"));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"));
    let value = match parsed {
        Some(v) => v,
        None if value.contains(',') => Value::Array(
            value
                .split(',')
                .map(|s| Value::String(s.trim().to_string()))
                .collect(),
        ),
        None => Value::String(value.to_string()),
    };
    Ok((key.to_string(), value))
}

pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> anyhow::Result<()> {
    for raw in overrides {
        let (k, v) = parse_override(raw)?;
        table.insert(k, v);
    }
    Ok(())
}

pub fn to_text(table: &Table) -> String {
    toml::to_string(table).expect("a table of plain values serializes")
}
