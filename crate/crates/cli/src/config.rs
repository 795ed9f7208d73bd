//! Flat `key = value` config files and flag/config/default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Input digests recorded by a manifest used as config.
    expected_inputs: BTreeMap<String, String>,
}

impl Config {
    /// Loads a flat config file, or a run manifest (JSON) whose resolved
    /// settings become the config. `command` is checked against the manifest.
    pub fn load(path: Option<&Path>, command: &str) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            let manifest: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("bad manifest {}: {e}", path.display())))?;
            if manifest.command != command {
                return Err(CliError::usage(format!(
                    "manifest {} was written by `{}`, not `{command}`",
                    path.display(),
                    manifest.command
                )));
            }
            let expected_inputs = manifest
                .inputs
                .into_iter()
                .map(|(k, d)| (k, d.sha256))
                .collect();
            return Ok(Self {
                values: manifest.config,
                expected_inputs,
            });
        }
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected `key = value`", n + 1));
            };
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(format!("line {}: empty key", n + 1));
            }
            let value = value.trim().trim_matches('"').to_string();
            if values.insert(key.clone(), value).is_some() {
                return Err(format!("line {}: duplicate key `{key}`", n + 1));
            }
        }
        Ok(Self {
            values,
            expected_inputs: BTreeMap::new(),
        })
    }

    pub fn expected_digest(&self, key: &str) -> Option<&str> {
        self.expected_inputs.get(key).map(String::as_str)
    }
}

/// Resolves settings as flag > config > default and records the outcome.
pub struct Resolver<'a> {
    config: &'a Config,
    used: Vec<String>,
    resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(config: &'a Config) -> Self {
        Self {
            config,
            used: Vec::new(),
            resolved: BTreeMap::new(),
        }
    }

    fn lookup<T>(&mut self, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.push(key.to_string());
        match self.config.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::usage(format!("config key `{key}` = `{raw}`: {e}"))),
        }
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let configured = self.lookup(key)?;
        let value = flag.or(configured);
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = self.optional(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Switch flags can only turn a setting on; config may set either way.
    pub fn switch(&mut self, key: &str, flag: bool) -> CliResult<bool> {
        let flag = if flag { Some(true) } else { None };
        self.value(key, flag, false)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>, default: PathBuf) -> CliResult<PathBuf> {
        let configured = self.lookup::<PathBuf>(key)?;
        let value = flag.or(configured).unwrap_or(default);
        self.resolved
            .insert(key.to_string(), value.display().to_string());
        Ok(value)
    }

    /// Keys present in the config that this command never consulted.
    pub fn unused_keys(&self) -> Vec<&str> {
        self.config
            .values
            .keys()
            .filter(|k| !self.used.iter().any(|u| u == *k))
            .map(String::as_str)
            .collect()
    }

    pub fn finish(self) -> CliResult<BTreeMap<String, String>> {
        let unused = self.unused_keys();
        if !unused.is_empty() {
            return Err(CliError::usage(format!(
                "unknown config keys: {}",
                unused.join(", ")
            )));
        }
        Ok(self.resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let cfg = Config::parse("# comment\nseed = 7\nprofit_margin=0.3 # trailing\n\n").unwrap();
        assert_eq!(cfg.values["seed"], "7");
        assert_eq!(cfg.values["profit-margin"], "0.3");
        assert!(Config::parse("seed 7").is_err());
        assert!(Config::parse("a=1\na=2").is_err());
    }

    #[test]
    fn flag_beats_config_beats_default() {
        let cfg = Config::parse("seed = 7\ntau = 40").unwrap();
        let mut r = Resolver::new(&cfg);
        assert_eq!(r.value("seed", Some(9u64), 0).unwrap(), 9);
        assert_eq!(r.value("tau", None, 53u32).unwrap(), 40);
        assert_eq!(r.value("scenarios", None, 1000usize).unwrap(), 1000);
        let resolved = r.finish().unwrap();
        assert_eq!(resolved["seed"], "9");
        assert_eq!(resolved["tau"], "40");
        assert_eq!(resolved["scenarios"], "1000");
    }

    #[test]
    fn bad_values_and_unknown_keys_are_usage_errors() {
        let cfg = Config::parse("seed = abc").unwrap();
        let err = Resolver::new(&cfg).value("seed", None, 0u64).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let cfg = Config::parse("sed = 1").unwrap();
        let mut r = Resolver::new(&cfg);
        r.value("seed", None, 0u64).unwrap();
        assert_eq!(r.finish().unwrap_err().exit_code(), 2);
    }
}
