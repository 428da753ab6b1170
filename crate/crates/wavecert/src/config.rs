//! Plain-text `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are skipped.
//! Keys are drawn from a fixed allowlist so a typo fails loudly instead of
//! silently falling back to a default. Values keep their raw text; the
//! typed accessors parse on demand so each verb can apply its own defaults.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::GBound;

/// Every key any verb understands. Shared across verbs on purpose: a config
/// file can drive `certify`, `simulate`, and `spectrum` without edits.
pub const KNOWN_KEYS: &[&str] = &[
    "c1", "g", "c2", "h", "q", "alpha", "mode", "c_min", "c_max", "g_min", "g_max", "kind", "k",
    "T", "N", "scheme", "ic_u", "ic_ut", "ic_v", "ic_vt", "trace_every", "snapshots", "cg_min",
    "cg_max", "ch_min", "ch_max", "resolution", "re_min", "re_max", "im_min", "im_max", "grid_nx",
    "grid_ny", "n_min", "n_max", "search", "seed", "method", "tol", "samples", "max_steps",
];

/// Parsed configuration: raw string values keyed by name, insertion-order
/// independent (BTreeMap keeps reproduction output deterministic).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::BadConfig(format!(
                    "line {}: expected `key = value`, got `{}`",
                    lineno + 1,
                    line
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::BadConfig(format!(
                    "line {}: unknown key `{}`",
                    lineno + 1,
                    key
                )));
            }
            if value.is_empty() {
                return Err(Error::BadConfig(format!(
                    "line {}: empty value for `{}`",
                    lineno + 1,
                    key
                )));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::BadConfig(format!(
                    "line {}: duplicate key `{}`",
                    lineno + 1,
                    key
                )));
            }
        }
        Ok(Self { values })
    }

    /// Apply a `key=value` override (CLI `--set`). The key must be known;
    /// overriding a key absent from the file is allowed.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(Error::BadConfig(format!(
                "override `{assignment}` is not of the form key=value"
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::BadConfig(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(Error::BadConfig(format!("empty value for `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::BadConfig(format!("`{key} = {s}` is not a number"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| Error::BadConfig(format!("missing required key `{key}`")))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::BadConfig(format!("`{key} = {s}` is not a nonnegative integer"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    pub fn i64(&self, key: &str) -> Result<Option<i64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<i64>()
                .map(Some)
                .map_err(|_| Error::BadConfig(format!("`{key} = {s}` is not an integer"))),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    /// `g_max` accepts `inf` (any case) for an unbounded feedback slope.
    pub fn g_bound(&self, key: &str) -> Result<Option<GBound>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) if s.eq_ignore_ascii_case("inf") => Ok(Some(GBound::PosInf)),
            Some(s) => s
                .parse::<f64>()
                .map(|v| Some(GBound::Finite(v)))
                .map_err(|_| {
                    Error::BadConfig(format!("`{key} = {s}` is neither a number nor `inf`"))
                }),
        }
    }
}
