//! Flat `key = value` configuration with command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Keys use the long
//! flag names with dashes or underscores. A value given on the command line
//! replaces the file's.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use quads_core::{Error, Result};

pub const KEYS: &[&str] = &[
    "seed",
    "workers",
    "out",
    "n",
    "count",
    "noise",
    "power",
    "sigma",
    "tau",
    "power_split",
    "instances",
    "realizations",
    "family",
    "coupling",
    "driver",
    "window_low",
    "window_high",
    "initial_guess",
    "growth",
    "max_integrations",
    "max_time_factor",
    "max_step",
    "cheb_tol",
    "max_failure_fraction",
    "samples",
    "time",
    "delta_sigma",
    "empirical",
];

#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {}: expected key = value", lineno + 1))
            })?;
            s.set(&normalize_key(k), v.trim())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> Result<()> {
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse(format!("unknown config key {key:?}")));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    /// Applies a command-line value if one was given.
    pub fn overlay<T: Display>(&mut self, key: &str, value: &Option<T>) -> Result<()> {
        match value {
            Some(v) => self.set(key, v),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Parse(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

/// `"8"` or `"7..11"` (inclusive).
pub fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("N range {s:?} is not N or lo..hi"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}
