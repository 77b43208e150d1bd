//! `key = value` config files merged under command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use licsi_core::{Error, Result};

/// Every key a config file may set. Flags use the same names with dashes.
pub const KNOWN_KEYS: &[&str] = &[
    "profile",
    "seed",
    "count",
    "n_tx",
    "n_sub",
    "n_rx",
    "paths",
    "delay_spread",
    "subcarrier_spacing",
    "rational_order",
    "n_samples",
    "stride",
    "r_f",
    "l_t",
    "a_bits_mag",
    "a_bits_phase",
    "b_bits_mag",
    "b_bits_phase",
    "v_bits",
    "v_scheme",
    "mu",
    "robust_eps",
    "delta_mag",
    "delta_phase",
    "m",
    "intervals",
    "hidden",
    "epochs",
    "batch_size",
    "lr_max",
    "lr_min",
    "data",
    "codec",
    "payload",
    "out",
    "out_dir",
    "index",
    "snr_db",
    "se_rx",
    "se_layers",
    "interference",
];

/// Short spellings accepted for a few channel keys.
const ALIASES: &[(&str, &str)] = &[("ntx", "n_tx"), ("nsub", "n_sub")];

pub fn alias_of(flag: &str) -> Option<&'static str> {
    let key = normalize(flag);
    ALIASES.iter().find(|(_, k)| *k == key).map(|(a, _)| *a)
}

pub fn normalize(key: &str) -> String {
    let key = key.trim().replace('-', "_");
    match ALIASES.iter().find(|(a, _)| *a == key) {
        Some((_, k)) => k.to_string(),
        None => key,
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parse a config file body. `#` starts a comment; later lines win.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected key = value", n + 1)))?;
        let key = normalize(k);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(config_err(format!("line {}: unknown key {key:?}", n + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Merged view of config-file values and flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(
        config: BTreeMap<String, String>,
        flags: impl IntoIterator<Item = (String, String)>,
    ) -> Self {
        let mut values = config;
        values.extend(flags);
        Self { values }
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
                    .map_err(|e| config_err(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| {
            config_err(format!(
                "missing required setting --{}",
                key.replace('_', "-")
            ))
        })
    }

    /// Comma-separated list; empty string gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|e| config_err(format!("{key}: {s:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cfg = parse_config("# comment\nr_f = 4\nl-t=100  # trailing\n\nntx = 8").unwrap();
        let s = Settings::new(cfg, [("r_f".to_string(), "6".to_string())]);
        assert_eq!(s.get::<usize>("r_f").unwrap(), Some(6));
        assert_eq!(s.get::<usize>("l_t").unwrap(), Some(100));
        assert_eq!(s.get_or::<usize>("stride", 4).unwrap(), 4);
        assert_eq!(s.get::<usize>("n_tx").unwrap(), Some(8));
        assert!(s.require::<usize>("n_samples").is_err());
    }

    #[test]
    fn bad_lines_are_config_errors() {
        assert!(parse_config("r_f 4").is_err());
        assert!(parse_config("bogus = 1").is_err());
        let s = Settings::new(parse_config("r_f = four").unwrap(), []);
        assert!(s.get::<usize>("r_f").is_err());
    }

    #[test]
    fn lists() {
        let s = Settings::new(parse_config("l_t = 64, 128,256\nhidden =").unwrap(), []);
        assert_eq!(s.list::<usize>("l_t").unwrap(), Some(vec![64, 128, 256]));
        assert_eq!(s.list::<usize>("hidden").unwrap(), Some(vec![]));
        assert_eq!(s.list::<usize>("r_f").unwrap(), None);
    }
}
