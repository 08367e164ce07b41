//! `key = value` configuration files. Flags given on the command line take
//! precedence over file values; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

/// Every key any subcommand understands.
pub const KNOWN_KEYS: &[&str] = &[
    "problem",
    "k",
    "omega",
    "c0",
    "nlayers",
    "first-layer",
    "levels",
    "n",
    "nc",
    "ni",
    "overlap",
    "oversampling",
    "tol",
    "max-iter",
    "seed",
    "output",
    "rank",
    "bisections",
    "preset",
    "ns",
    "cols",
    "grid-levels",
    "ncs",
    "seeds",
    "jobs",
    "all-seeds",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'key = value'", lineno + 1))?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key '{key}'", lineno + 1));
            }
            let value = value.trim();
            let value = ['"', '\'']
                .iter()
                .find_map(|q| value.strip_prefix(*q).and_then(|v| v.strip_suffix(*q)))
                .unwrap_or(value);
            values.insert(key, value.to_string());
        }
        Ok(Self { values })
    }

    /// The flag value if given, else the parsed file value.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| format!("config key '{key}': {e}"))
            })
            .transpose()
    }
}

/// Comma-separated list, e.g. `0,2,3,4`.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Self(Vec::new()));
        }
        s.split(',')
            .map(|t| t.trim().parse::<T>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<Vec<T>, String>>()
            .map(Self)
    }
}

/// Semicolon-separated level specs, e.g. `2x2;4x4;2x2,2x2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecList(pub Vec<String>);

impl FromStr for SpecList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(Self(
            s.split(';')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect(),
        ))
    }
}
