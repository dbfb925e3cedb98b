//! Plain-text `key = value` configuration, one entry per line, with `#`
//! comment lines. Keys may repeat; order is preserved.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{FvnError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: Vec<(String, String)>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Append an entry. Values are single-line and have no surrounding
    /// whitespace so that they survive a text round trip.
    pub fn push(&mut self, key: &str, value: impl ToString) -> Result<()> {
        let value = value.to_string();
        if !valid_key(key) {
            return Err(FvnError::param("key", format!("`{key}` is not a valid key")));
        }
        if value.contains(['\n', '\r']) || value.trim() != value {
            return Err(FvnError::param(
                "value",
                format!("value for `{key}` must be one line without outer whitespace"),
            ));
        }
        self.entries.push((key.to_string(), value));
        Ok(())
    }

    /// Replace every entry for `key` with a single one.
    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<()> {
        self.entries.retain(|(k, _)| k != key);
        self.push(key, value)
    }

    /// Last value recorded for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                FvnError::param("config", format!("cannot parse `{key} = {v}`"))
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| FvnError::param("config", format!("missing `{key}`")))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                FvnError::param("config", format!("line {}: expected `key = value`", i + 1))
            })?;
            c.push(k.trim(), v.trim())
                .map_err(|e| FvnError::param("config", format!("line {}: {e}", i + 1)))?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| FvnError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| FvnError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|source| FvnError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
