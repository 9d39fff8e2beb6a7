//! Flat `key = value` config files. `#` starts a comment; blank lines are
//! ignored; keys are unique.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    /// Remove and parse `key`, keeping `default` when absent.
    pub fn take<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| Error::Config(format!("{key} = {v}: {e}"))),
        }
    }

    /// Remove and parse a comma-separated list.
    pub fn take_list<T>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|e| Error::Config(format!("{key}: `{s}`: {e}"))))
                .collect(),
        }
    }

    /// Error on any key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
        }
    }
}

/// Writer producing the same format, one key per line in insertion order.
#[derive(Debug, Default)]
pub struct KvWriter(String);

impl KvWriter {
    pub fn put(&mut self, key: &str, v: impl Display) -> &mut Self {
        self.0.push_str(&format!("{key} = {v}\n"));
        self
    }

    pub fn put_list<T: Display>(&mut self, key: &str, v: &[T]) -> &mut Self {
        let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        self.put(key, s.join(","))
    }

    pub fn finish(&mut self) -> String {
        std::mem::take(&mut self.0)
    }
}
