//! Flat `key = value` run configuration with command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Keys whose value came from the file; their relative paths resolve
    /// against `base`. Override values resolve against the working directory.
    from_file: BTreeSet<String>,
    base: PathBuf,
}

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; a repeated key is an error.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Validation(format!("config line {}: expected key = value, got {line:?}", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::Validation(format!("config line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Validation(format!("config line {}: duplicate key {k:?}", i + 1)));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self, CliError> {
        let values = parse_pairs(text)?;
        let from_file = values.keys().cloned().collect();
        Ok(RunConfig { values, from_file, base: base.to_path_buf() })
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::from_str_with_base(&text, &base)?;
        for (k, v) in overrides {
            cfg.values.insert(k.clone(), v.clone());
            cfg.from_file.remove(k);
        }
        Ok(cfg)
    }

    /// SHA-256 over the sorted effective `key=value` lines.
    pub fn hash(&self) -> String {
        self.hash_keys(|_| true)
    }

    /// Hash restricted to the keys accepted by `keep`.
    pub fn hash_keys(&self, keep: impl Fn(&str) -> bool) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.values.iter().filter(|(k, _)| keep(k)) {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::Validation(format!("config key {key:?} is required")))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| CliError::Validation(format!("config key {key:?}: {v:?}: {e}"))),
        }
    }

    /// Comma-separated list.
    pub fn list<T>(&self, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|e| CliError::Validation(format!("config key {key:?}: {s:?}: {e}"))))
                .collect(),
        }
    }

    /// Entries `prefix<name> = value`, keyed by `name`.
    pub fn named(&self, prefix: &str) -> BTreeMap<String, String> {
        self.values
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|n| (n.to_string(), v.clone())))
            .filter(|(n, _)| !n.is_empty())
            .collect()
    }

    fn resolve(&self, key: &str, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        if p.is_relative() && self.from_file.contains(key) {
            self.base.join(p)
        } else {
            p
        }
    }

    /// Path value of `key`; the file must exist.
    pub fn input_path(&self, key: &str) -> Result<PathBuf, CliError> {
        let p = self.resolve(key, self.require(key)?);
        if !p.exists() {
            return Err(CliError::Validation(format!("{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    /// Existing input paths for every `prefix<name>` key.
    pub fn named_inputs(&self, prefix: &str) -> Result<BTreeMap<String, PathBuf>, CliError> {
        self.named(prefix)
            .into_keys()
            .map(|n| {
                check_name(&n)?;
                Ok((n.clone(), self.input_path(&format!("{prefix}{n}"))?))
            })
            .collect()
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        Ok(self.resolve("out_dir", self.require("out_dir")?))
    }
}

/// Resource and dataset names become file names.
pub fn check_name(name: &str) -> Result<(), CliError> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(format!("name {name:?} must use only ASCII letters, digits, '_', '-' and '.'")))
    }
}
