//! Plain-text `key = value` configuration files with `[section]` headers.
//!
//! ```text
//! [model]
//! a = 1.0
//! tau = 1.0
//! dim = 2
//!
//! [sweep]
//! param = diff
//! values = 0.05, 0.15, 0.25
//! ```
//!
//! Lines starting with `#` are comments. Keys before the first header live in
//! the unnamed section `""`.

use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("[{section}] {key}: expected {kind}, got `{value}`")]
    BadValue { section: String, key: String, kind: &'static str, value: String },
    #[error("io error reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(ConfigError::Parse {
                        line: lineno + 1,
                        msg: format!("malformed section header `{line}`"),
                    });
                }
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: lineno + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    /// Insert or overwrite a value (used for CLI flag overrides).
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.into());
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(section, key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::BadValue {
                    section: section.into(),
                    key: key.into(),
                    kind: "number",
                    value: v.into(),
                })
            })
            .transpose()
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(section, key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::BadValue {
                    section: section.into(),
                    key: key.into(),
                    kind: "integer",
                    value: v.into(),
                })
            })
            .transpose()
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        self.get(section, key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::BadValue {
                    section: section.into(),
                    key: key.into(),
                    kind: "integer",
                    value: v.into(),
                })
            })
            .transpose()
    }

    /// Comma- or whitespace-separated list of numbers.
    pub fn get_f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(section, key)
            .map(|v| {
                v.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse().map_err(|_| ConfigError::BadValue {
                            section: section.into(),
                            key: key.into(),
                            kind: "number list",
                            value: v.into(),
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Canonical text form; hashed into run provenance.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (name, kv) in &self.sections {
            if !name.is_empty() {
                out.push_str(&format!("[{name}]\n"));
            }
            for (k, v) in kv {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// FNV-1a hash of a string; stable across platforms, used for config
/// provenance stamps.
pub fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
