use std::collections::BTreeMap;
use std::str::FromStr;

use super::ReportError;

/// `key = value` settings, one per line; `#` starts a comment.
///
/// Keys are the long command-line flag names without the leading dashes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parses the value under `key`, if present.
    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| format!("{key} = {raw:?}: {e}")),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ReportError> {
    let mut cfg = ConfigFile::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ReportError::Config { line: i + 1, message: format!("expected key = value, got {line:?}") });
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(ReportError::Config { line: i + 1, message: "empty key".to_string() });
        }
        if cfg.entries.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(ReportError::Config { line: i + 1, message: format!("duplicate key {key:?}") });
        }
    }
    Ok(cfg)
}
