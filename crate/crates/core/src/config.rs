//! Line-oriented `key = value` job configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A documented configuration key.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub key: &'static str,
    /// `None` marks a key without a default (required unless the command
    /// says otherwise).
    pub default: Option<&'static str>,
    pub is_path: bool,
    pub doc: &'static str,
}

impl KeySpec {
    pub const fn value(key: &'static str, default: &'static str, doc: &'static str) -> Self {
        KeySpec { key, default: Some(default), is_path: false, doc }
    }

    pub const fn optional(key: &'static str, doc: &'static str) -> Self {
        KeySpec { key, default: None, is_path: false, doc }
    }

    pub const fn path(key: &'static str, doc: &'static str) -> Self {
        KeySpec { key, default: None, is_path: true, doc }
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// ignored; a repeated key is an error.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected `key = value`, found {line:?}") })?;
        let k = k.trim();
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(Error::Parse { line: i + 1, msg: format!("invalid key {k:?}") });
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Parse { line: i + 1, msg: format!("duplicate key {k:?}") });
        }
    }
    Ok(out)
}

/// A configuration checked against a key schema, with defaults filled in
/// and relative paths resolved against the configuration file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    command: String,
    values: BTreeMap<String, String>,
}

impl JobConfig {
    pub fn resolve(
        command: &str,
        raw: BTreeMap<String, String>,
        schema: &[KeySpec],
        base_dir: Option<&Path>,
    ) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, v) in raw {
            let spec = schema.iter().find(|s| s.key == k).ok_or_else(|| {
                let known: Vec<&str> = schema.iter().map(|s| s.key).collect();
                Error::config(format!("unknown key {k:?} for {command} (known: {})", known.join(", ")))
            })?;
            let v = match base_dir {
                Some(b) if spec.is_path && !v.is_empty() && Path::new(&v).is_relative() => {
                    b.join(&v).to_string_lossy().into_owned()
                }
                _ => v,
            };
            values.insert(k, v);
        }
        for s in schema {
            if let Some(d) = s.default {
                values.entry(s.key.to_string()).or_insert_with(|| d.to_string());
            }
        }
        Ok(JobConfig { command: command.to_string(), values })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::config(format!("{} requires key {key:?}", self.command)))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require(key)?))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::config(format!("invalid value {v:?} for {key}")))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.require(key)? {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            v => Err(Error::config(format!("invalid boolean {v:?} for {key}"))),
        }
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.require(key)?
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::config(format!("invalid list entry {s:?} for {key}"))))
            .collect()
    }

    /// The resolved configuration in the input syntax, keys sorted.
    pub fn echo(&self) -> String {
        let mut s = format!("# resolved configuration for {}\n", self.command);
        for (k, v) in &self.values {
            writeln!(s, "{k} = {v}").expect("writing to a String");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &[KeySpec] = &[
        KeySpec::value("lr", "0.01", "learning rate"),
        KeySpec::path("data", "input file"),
        KeySpec::optional("note", "free text"),
    ];

    #[test]
    fn parse_and_resolve() {
        let raw = parse_config("# comment\nlr = 0.5\n\ndata = in/x.tsv  # trailing\n").unwrap();
        let c = JobConfig::resolve("train", raw, SCHEMA, Some(Path::new("/base"))).unwrap();
        assert_eq!(c.parse::<f64>("lr").unwrap(), 0.5);
        assert_eq!(c.path("data").unwrap(), PathBuf::from("/base/in/x.tsv"));
        assert!(c.get("note").is_none());
        let echoed = JobConfig::resolve("train", parse_config(&c.echo()).unwrap(), SCHEMA, None).unwrap();
        assert_eq!(echoed, c);
    }

    #[test]
    fn defaults_and_errors() {
        let c = JobConfig::resolve("train", BTreeMap::new(), SCHEMA, None).unwrap();
        assert_eq!(c.get("lr"), Some("0.01"));
        assert!(matches!(c.require("data"), Err(Error::Config(_))));
        let raw = parse_config("bogus = 1").unwrap();
        assert!(matches!(JobConfig::resolve("train", raw, SCHEMA, None), Err(Error::Config(_))));
        assert!(matches!(parse_config("a = 1\na = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("no equals sign"), Err(Error::Parse { line: 1, .. })));
    }
}
