use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::path::MAX_GRID_LEVEL;
use crate::rde::FieldKind;

/// Highest grid level the runner accepts.
pub const MAX_CLI_GRID_LEVEL: u32 = 14;

/// How a config value is validated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Count,
    /// Count that must be at least 1.
    Positive,
    Seed,
    Real,
    /// Rough-path exponent, `2 < p < 3`.
    RoughP,
    GridLevel,
    Reals,
    Counts,
    Field,
    /// Optional file path; empty means "not given".
    File,
}

/// One accepted key with its default.
pub type KeySpec = (&'static str, Kind, &'static str);

/// Maps a key as written in a config file or flag to its canonical form.
pub fn canonical_key(key: &str) -> String {
    let k = key.trim().replace('-', "_");
    match k.as_str() {
        "K" => "k".into(),
        "n_samples" => "n".into(),
        _ => k.to_lowercase(),
    }
}

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", no + 1)))?;
        let key = canonical_key(k);
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", no + 1)));
        }
    }
    Ok(out)
}

/// Fully resolved and validated settings for one subcommand.
#[derive(Clone, Debug)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key} = '{value}': {why}"))
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| bad(key, value, e))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = value.split(',').map(|s| parse_one(key, s)).collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(bad(key, value, "empty list"));
    }
    Ok(items)
}

fn validate(key: &str, kind: Kind, value: &str) -> Result<()> {
    match kind {
        Kind::Count => parse_one::<usize>(key, value).map(drop),
        Kind::Positive => match parse_one::<usize>(key, value)? {
            0 => Err(bad(key, value, "must be at least 1")),
            _ => Ok(()),
        },
        Kind::Seed => parse_one::<u64>(key, value).map(drop),
        Kind::Real => match parse_one::<f64>(key, value)? {
            v if v.is_finite() => Ok(()),
            _ => Err(bad(key, value, "must be finite")),
        },
        Kind::RoughP => match parse_one::<f64>(key, value)? {
            v if v > 2.0 && v < 3.0 => Ok(()),
            _ => Err(bad(key, value, "rough-path experiments need 2 < p < 3")),
        },
        Kind::GridLevel => match parse_one::<u32>(key, value)? {
            v if v <= MAX_CLI_GRID_LEVEL.min(MAX_GRID_LEVEL) => Ok(()),
            _ => Err(bad(key, value, format!("grid level must be ≤ {MAX_CLI_GRID_LEVEL}"))),
        },
        Kind::Reals => match parse_list::<f64>(key, value)? {
            v if v.iter().all(|x| x.is_finite()) => Ok(()),
            _ => Err(bad(key, value, "entries must be finite")),
        },
        Kind::Counts => match parse_list::<usize>(key, value)? {
            v if v.iter().all(|&x| x > 0) => Ok(()),
            _ => Err(bad(key, value, "entries must be at least 1")),
        },
        Kind::Field => value.parse::<FieldKind>().map(drop),
        Kind::File => Ok(()),
    }
}

impl Settings {
    /// Layers `file` over the defaults and `flags` over both, rejecting unknown keys and
    /// validating every value. `output_dir` is accepted everywhere and left unvalidated.
    pub fn resolve(
        command: &str,
        keys: &[KeySpec],
        file: &BTreeMap<String, String>,
        flags: &[(String, String)],
    ) -> Result<Self> {
        let mut values: BTreeMap<String, String> = keys.iter().map(|(k, _, v)| (k.to_string(), v.to_string())).collect();
        let layered = file.iter().map(|(k, v)| (k.clone(), v.clone())).chain(flags.iter().cloned());
        for (k, v) in layered {
            let key = canonical_key(&k);
            if key != "output_dir" && !values.contains_key(&key) {
                return Err(Error::Config(format!("'{command}' does not take key '{key}'")));
            }
            values.insert(key, v);
        }
        for (key, kind, _) in keys {
            validate(key, *kind, &values[*key])?;
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        parse_one(key, self.raw(key))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        parse_list(key, self.raw(key))
    }

    /// `key = value` lines, one per resolved key.
    pub fn plan(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[KeySpec] = &[("p", Kind::RoughP, "2.5"), ("k", Kind::Positive, "4"), ("r_grid", Kind::Reals, "1,2")];

    #[test]
    fn layering_and_validation() {
        let file = parse_config("# comment\nK = 6\np=2.7  # trailing\n\n").unwrap();
        let s = Settings::resolve("x", KEYS, &file, &[("p".into(), "2.9".into())]).unwrap();
        assert_eq!(s.get::<usize>("k").unwrap(), 6);
        assert_eq!(s.get::<f64>("p").unwrap(), 2.9);
        assert_eq!(s.list::<f64>("r_grid").unwrap(), vec![1.0, 2.0]);
        assert!(s.plan().contains("k = 6\n"));
        let bad_p = Settings::resolve("x", KEYS, &BTreeMap::new(), &[("p".into(), "3".into())]);
        assert!(matches!(bad_p, Err(Error::Config(_))));
        assert!(Settings::resolve("x", KEYS, &BTreeMap::new(), &[("q".into(), "1".into())]).is_err());
        assert!(Settings::resolve("x", KEYS, &BTreeMap::new(), &[("k".into(), "0".into())]).is_err());
        assert!(parse_config("p 2.5").is_err());
        assert!(parse_config("p = 1\np = 2").is_err());
    }

    #[test]
    fn grid_level_cap() {
        let keys: &[KeySpec] = &[("grid_level", Kind::GridLevel, "8")];
        assert!(Settings::resolve("x", keys, &BTreeMap::new(), &[("grid_level".into(), "14".into())]).is_ok());
        assert!(Settings::resolve("x", keys, &BTreeMap::new(), &[("grid-level".into(), "15".into())]).is_err());
    }
}
