use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Flat `key = value` settings merged from a config file and command-line
/// flags. Every value read (or defaulted) is recorded so the effective
/// configuration can be echoed and hashed.
#[derive(Debug, Clone, Default)]
pub struct Params {
    command: String,
    given: BTreeMap<String, String>,
    effective: BTreeMap<String, String>,
}

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value, got '{line}'", i + 1)))?;
        let key = normalize_key(k);
        if key.is_empty() {
            return Err(Error::Parse(format!("config line {}: empty key", i + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

impl Params {
    /// File values first, then flag values on top.
    pub fn new(command: &str, file: BTreeMap<String, String>, flags: BTreeMap<String, String>) -> Self {
        let mut given = file;
        given.extend(flags);
        Params {
            command: command.to_string(),
            given,
            effective: BTreeMap::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.given.get(key).cloned()
    }

    pub fn get<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match self.raw(key) {
            Some(s) => s.parse::<T>().map_err(|e| Error::Parse(format!("{key} = '{s}': {e}")))?,
            None => default,
        };
        self.effective.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn get_opt<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.raw(key) {
            Some(s) if s != "auto" => {
                let value = s.parse::<T>().map_err(|e| Error::Parse(format!("{key} = '{s}': {e}")))?;
                self.effective.insert(key.to_string(), value.to_string());
                Ok(Some(value))
            }
            _ => {
                self.effective.insert(key.to_string(), "auto".into());
                Ok(None)
            }
        }
    }

    pub fn require<T>(&mut self, key: &str) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.get_opt(key)?
            .ok_or_else(|| Error::InvalidInput(format!("missing required setting '{key}'")))
    }

    pub fn get_list<T>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let values = match self.raw(key) {
            Some(s) => s
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<T>().map_err(|e| Error::Parse(format!("{key} entry '{t}': {e}"))))
                .collect::<Result<Vec<T>>>()?,
            None => default.to_vec(),
        };
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("'{key}' must list at least one value")));
        }
        let joined: Vec<String> = values.iter().map(ToString::to_string).collect();
        self.effective.insert(key.to_string(), joined.join(","));
        Ok(values)
    }

    /// Settings supplied but never read, which are almost always typos.
    pub fn check_unused(&self) -> Result<()> {
        let unused: Vec<&String> = self.given.keys().filter(|k| !self.effective.contains_key(*k)).collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("unknown settings for '{}': {unused:?}", self.command)))
        }
    }

    pub fn effective(&self) -> &BTreeMap<String, String> {
        &self.effective
    }

    /// Canonical text: `command=<name>` followed by sorted `key=value` lines.
    pub fn canonical(&self) -> String {
        let mut s = format!("command={}\n", self.command);
        for (k, v) in &self.effective {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Params::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
