//! `key = value` overlay files for command-line defaults.
//!
//! One setting per line. Blank lines and lines starting with `#` are
//! ignored; there are no inline comments, so values may contain `#`. Keys
//! are lowercase ASCII letters, digits and `-`, with `_` accepted as a
//! spelling of `-`. A value wrapped in double quotes has them removed,
//! which is the only way to keep leading or trailing spaces.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {lineno}: expected key = value"))
            })?;
            let key = key.trim().replace('_', "-");
            if key.is_empty()
                || !key
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
            {
                return Err(Error::Parse(format!(
                    "config line {lineno}: bad key {key:?}"
                )));
            }
            let mut value = value.trim();
            if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
                value = &value[1..value.len() - 1];
            }
            if value.is_empty() {
                return Err(Error::Parse(format!(
                    "config line {lineno}: {key} has no value"
                )));
            }
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(Error::Parse(format!(
                    "config line {lineno}: {key} set twice"
                )));
            }
            entries.push((key, value.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Settings in file order.
    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
