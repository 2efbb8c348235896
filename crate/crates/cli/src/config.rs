//! Flat key=value run configuration, merged under CLI flags.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

/// Parsed `key=value` lines; `#` starts a comment, blank lines ignored.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    pub values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Input(format!(
                    "config {} line {}: expected key=value, got {line:?}",
                    path.display(),
                    i + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Input(format!("config key {key}: cannot parse value {raw:?}"))
            }),
        }
    }
}

/// Seed precedence: CLI flag, config file, LINEUPLAB_SEED, then 0.
pub fn resolve_seed(flag: Option<u64>, config: &ConfigFile) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = config.parse::<u64>("seed")? {
        return Ok(s);
    }
    match std::env::var("LINEUPLAB_SEED") {
        Ok(raw) => raw
            .parse::<u64>()
            .map_err(|_| CliError::Input(format!("LINEUPLAB_SEED: cannot parse {raw:?}"))),
        Err(_) => Ok(0),
    }
}
