//! Layered run configuration: an optional JSON file, then flag overrides
//! addressed by dotted key paths.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config contents.
    Usage(String),
    Core(popsynth_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_io() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<popsynth_core::Error> for CliError {
    fn from(e: popsynth_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Flag overrides collected in command-line order.
#[derive(Default)]
pub struct Overrides(Vec<(String, Value)>);

impl Overrides {
    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("flag values serialize");
        self.0.push((key.to_string(), v));
    }

    pub fn set_opt<T: Serialize>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Parses `KEY=VALUE`; the value is read as JSON, falling back to a
    /// plain string.
    pub fn set_raw(&mut self, assignment: &str) -> CliResult<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--set expects KEY=VALUE, got `{assignment}`"))
        })?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.0.push((key.trim().to_string(), value));
        Ok(())
    }
}

fn insert_path(root: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Usage(format!(
                "empty segment in config key `{key}`"
            )));
        }
        let map = match node {
            Value::Object(m) => m,
            _ => {
                return Err(CliError::Usage(format!(
                    "config key `{key}` crosses a non-object value"
                )))
            }
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Reads the config file (or starts empty) and applies the overrides.
pub fn layered(file: Option<&Path>, overrides: Overrides) -> CliResult<Value> {
    let mut root = match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| popsynth_core::Error::io(path, e))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            if !v.is_object() {
                return Err(CliError::Usage(format!(
                    "config {}: expected a JSON object",
                    path.display()
                )));
            }
            v
        }
        None => Value::Object(Map::new()),
    };
    for (key, value) in overrides.0 {
        insert_path(&mut root, &key, value)?;
    }
    Ok(root)
}

pub fn parse<T: DeserializeOwned>(value: Value) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// Removes and returns a required path-valued key.
pub fn take_path(value: &mut Value, key: &str) -> CliResult<PathBuf> {
    let v = value.as_object_mut().and_then(|m| m.remove(key));
    match v {
        Some(Value::String(s)) => Ok(PathBuf::from(s)),
        Some(other) => Err(CliError::Usage(format!(
            "config: `{key}` must be a path string, got {other}"
        ))),
        None => Err(CliError::Usage(format!("config: missing field `{key}`"))),
    }
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| popsynth_core::Error::io(dir, e))?;
    Ok(())
}

pub fn write_file(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| popsynth_core::Error::io(path, e))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(popsynth_core::Error::from)?;
    write_file(path, &(text + "\n"))
}

/// Echoes the resolved config into an output directory.
pub fn write_effective(dir: &Path, config: &impl Serialize) -> CliResult<()> {
    create_dir(dir)?;
    write_json(&dir.join(EFFECTIVE_CONFIG_FILE), config)
}
