//! Flat `key = value` configuration files mirroring the command-line flags.
//!
//! ```text
//! # Burgers sweep on four workers
//! model = burgers
//! n_u = 200
//! workers = 4
//! ```
//!
//! Keys are case-insensitive and `_` is equivalent to `-`, so `n_u`,
//! `n-u` and `N_u` name the same flag. A `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::ExperimentError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        parse_config(&text).map_err(|e| ExperimentError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize_key(key)).map(String::as_str)
    }

    /// Parses the value of `key`, `None` when absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ExperimentError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| ExperimentError::Usage(format!("config key {key}: {e}"))))
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ExperimentError> {
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ExperimentError::Usage(format!("line {}: expected key = value", n + 1)));
        };
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(ExperimentError::Usage(format!("line {}: empty key", n + 1)));
        }
        if entries.insert(key.clone(), value.trim().to_owned()).is_some() {
            return Err(ExperimentError::Usage(format!("line {}: duplicate key {key}", n + 1)));
        }
    }
    Ok(ConfigFile { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_key_spellings() {
        let cfg = parse_config("# header\nmodel = wave  # trailing\n\nN_u=200\nlr = 1e-3\n").unwrap();
        assert_eq!(cfg.raw("model"), Some("wave"));
        assert_eq!(cfg.get::<usize>("n-u").unwrap(), Some(200));
        assert_eq!(cfg.get::<f64>("LR").unwrap(), Some(1e-3));
        assert_eq!(cfg.get::<f64>("epochs").unwrap(), None);
        assert_eq!(cfg.keys().count(), 3);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("model burgers").is_err());
        assert!(parse_config("= 3").is_err());
        assert!(parse_config("seed = 1\nseed = 2").is_err());
        assert!(parse_config("seed = x").unwrap().get::<u64>("seed").is_err());
    }
}
