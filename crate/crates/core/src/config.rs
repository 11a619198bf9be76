//! TOML configuration files, with JSON accepted when the file says so.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Parses `text` as TOML, or as JSON when it starts with `{` or the path
/// ends in `.json`.
pub fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    let parsed = if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    };
    parsed.map_err(|msg| Error::Config(format!("{}: {msg}", path.display())))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}
