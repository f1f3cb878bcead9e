//! Flat `key = value` configuration files mirroring the CLI flags.
//!
//! Blank lines and lines starting with `#` are ignored. Keys use the flag
//! spelling without the leading dashes (`max-lag`, `seed`); underscores are
//! accepted as well.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::param(format!("config line {}: expected key = value", i + 1))
            })?;
            if k.trim().is_empty() {
                return Err(Error::param(format!("config line {}: empty key", i + 1)));
            }
            entries.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    /// Parsed value for `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::param(format!("config key `{key}`: bad value `{v}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_pairs() {
        let c = KeyValueConfig::parse("# sim\nchannel = swell\nmax_lag=25\n\nseed = 7\n").unwrap();
        assert_eq!(c.raw("channel"), Some("swell"));
        assert_eq!(c.get::<usize>("max-lag").unwrap(), Some(25));
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.get::<u64>("packets").unwrap(), None);
        assert!(c.get::<u64>("channel").is_err());
    }

    #[test]
    fn rejects_garbage_lines() {
        assert!(KeyValueConfig::parse("just words\n").is_err());
        assert!(KeyValueConfig::parse(" = 3\n").is_err());
    }
}
