//! Flat `key = value` run configuration with command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Raw settings plus a record of which keys a command consumed, so that
/// leftovers can be reported as unknown.
#[derive(Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            for (n, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = split_pair(line)
                    .ok_or_else(|| CliError::Config(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
                cfg.values.insert(k, v);
            }
        }
        for item in overrides {
            let (k, v) = split_pair(item).ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
            cfg.values.insert(k, v);
        }
        Ok(cfg)
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.values.get(key).cloned()
    }

    pub fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_value(key, &v),
        }
    }

    pub fn optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key).map(|v| parse_value(key, &v)).transpose()
    }

    pub fn list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_value(key, s))
                .collect(),
        }
    }

    pub fn path(&mut self, key: &str) -> Result<Option<PathBuf>, CliError> {
        Ok(self.raw(key).map(PathBuf::from))
    }

    pub fn required_path(&mut self, key: &str) -> Result<PathBuf, CliError> {
        self.path(key)?.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    /// Fails on keys that no accessor asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let unknown: Vec<&str> = self.values.keys().filter(|k| !self.used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then(|| (k.to_string(), v.trim().to_string()))
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("cannot parse `{key}` value {v:?}")))
}

pub fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("input file {} does not exist", path.display())))
    }
}

pub fn require_dir(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Config(format!("input directory {} does not exist", path.display())))
    }
}
