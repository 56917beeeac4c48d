//! Flat `key=value` configuration text.
//!
//! The format underlies experiment configs, cluster endpoint files, bundle
//! manifests, and dataset metadata: one `key=value` pair per line, `#` starts
//! a comment, blank lines are ignored, and dotted keys (`train.eta`) namespace
//! related settings. Later assignments to the same key win.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KvError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: empty key")]
    EmptyKey { line: usize },
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("key {key:?}: invalid value {value:?} ({expected})")]
    Invalid {
        key: String,
        value: String,
        expected: &'static str,
    },
}

/// Parsed `key=value` document with typed accessors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some(eq) = stripped.find('=') else {
                return Err(KvError::Malformed {
                    line,
                    text: raw.trim().to_string(),
                });
            };
            let key = stripped[..eq].trim();
            let value = stripped[eq + 1..].trim();
            if key.is_empty() {
                return Err(KvError::EmptyKey { line });
            }
            entries.insert(key.to_string(), value.to_string());
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn get_parsed<T: std::str::FromStr>(
        &self,
        key: &str,
        expected: &'static str,
    ) -> Result<Option<T>, KvError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| KvError::Invalid {
                key: key.to_string(),
                value: v.to_string(),
                expected,
            }),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, KvError> {
        self.get_parsed(key, "unsigned integer")
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, KvError> {
        self.get_parsed(key, "unsigned integer")
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, KvError> {
        self.get_parsed(key, "float")
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, KvError> {
        match self.get(key) {
            None => Ok(None),
            Some("true") | Some("1") | Some("yes") => Ok(Some(true)),
            Some("false") | Some("0") | Some("no") => Ok(Some(false)),
            Some(v) => Err(KvError::Invalid {
                key: key.to_string(),
                value: v.to_string(),
                expected: "bool (true/false/1/0/yes/no)",
            }),
        }
    }

    /// Comma-separated list of unsigned integers, e.g. `layers=10,10,10,1`.
    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, KvError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|item| {
                    item.trim().parse::<usize>().map_err(|_| KvError::Invalid {
                        key: key.to_string(),
                        value: v.to_string(),
                        expected: "comma-separated unsigned integers",
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Keys sharing a dotted prefix, with the prefix removed.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.entries.iter().filter_map(move |(k, v)| {
            let rest = k.strip_prefix(prefix)?;
            let rest = rest.strip_prefix('.')?;
            Some((rest, v.as_str()))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Renders the map back to text, keys sorted, one pair per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Merges `other` on top of `self` (other wins on conflicts).
    pub fn merge(&mut self, other: &KvMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }
}
