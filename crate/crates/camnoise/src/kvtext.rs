//! Line-oriented `key = value` text format.
//!
//! Used for dataset manifests, record sidecars, session manifests, model
//! manifests, and CLI config files. The format is deliberately tiny:
//!
//! - one `key = value` pair per line, keys are `[A-Za-z0-9_.]+`;
//! - blank lines and lines starting with `#` are ignored;
//! - values are stored verbatim (trimmed); numbers use Rust's standard
//!   formatting, with floats written via [`format_f64`] so a round-trip
//!   through text is bit-exact.
//!
//! Keys keep their first-insertion order so written files are stable and
//! diffable.

use std::path::Path;

use crate::error::{Error, Result};

/// An ordered key → value map backed by the text format above.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap {
    entries: Vec<(String, String)>,
}

impl KvMap {
    /// Creates an empty map.
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key` to `value`, replacing an existing entry in place.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        debug_assert!(
            key.chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.'),
            "invalid key {key:?}"
        );
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    /// Sets `key` to a float formatted for bit-exact round-trips.
    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, format_f64(value));
    }

    /// Returns the raw value for `key`, if present.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Returns the value for `key` or a format error naming `path`.
    pub fn require(&self, key: &str, path: &Path) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::format(path, format!("missing key `{key}`")))
    }

    /// Parses the value for `key` as `T`, with errors naming `path`.
    pub fn require_parsed<T>(&self, key: &str, path: &Path) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key, path)?;
        raw.parse::<T>().map_err(|e| {
            Error::format(path, format!("key `{key}`: cannot parse {raw:?}: {e}"))
        })
    }

    /// Iterates entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Whether the map is empty.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the text format. Later duplicate keys override earlier ones.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut map = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::format(path, format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
            {
                return Err(Error::format(
                    path,
                    format!("line {}: invalid key {key:?}", lineno + 1),
                ));
            }
            map.set(key, value.trim());
        }
        Ok(map)
    }

    /// Serializes to the text format (one `key = value` line per entry).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Reads and parses a file.
    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Writes the map to a file.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Formats an `f64` so that parsing the text recovers the exact bits.
///
/// Rust's shortest-round-trip float formatting guarantees `text.parse()`
/// returns the original value; non-finite values are spelled so that
/// `f64::from_str` accepts them back.
pub fn format_f64(value: f64) -> String {
    if value.is_nan() {
        "NaN".to_string()
    } else if value.is_infinite() {
        if value > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        let mut s = format!("{value}");
        // Keep a trailing ".0" so integers stay visibly floats.
        if !s.contains('.') && !s.contains('e') && !s.contains('E') {
            s.push_str(".0");
        }
        s
    }
}
