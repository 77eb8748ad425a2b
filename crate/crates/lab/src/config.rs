//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("key `{key}`: cannot parse `{value}` ({reason})")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("override `{0}` is missing a value")]
    MissingValue(String),
    #[error("{0}")]
    Invalid(String),
}

/// Every recognised key with its default value.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "20240611"),
    ("replicates", "100"),
    ("workers", "0"),
    ("out", "results"),
    ("theta.hurst", "0.85"),
    ("theta.sigma2", "1"),
    ("eps", "1"),
    ("eps_grid", "0.0625,0.015625,0.00390625,0.0009765625,0.000244140625"),
    ("t_grid", "32,64,128,256"),
    ("horizon", "128"),
    ("dt", "0.125"),
    ("samples", "262144"),
    ("quad.rel_tol", "1e-10"),
    ("quad.max_panels", "4000"),
    ("quad.tail_cut", "1e-16"),
    ("fredholm.n_nodes", "256"),
    ("fredholm.residual_tol", "1e-8"),
    ("pq.max_iter", "500"),
    ("pq.fp_tol", "1e-10"),
    ("lik.backend", "discrete-exact"),
    ("lik.fd_step", "1e-4"),
    ("mle.max_evals", "2000"),
    ("lan.replicates", "400"),
    ("lan.u", "0.6,0.8"),
    ("lan.horizon", "256"),
    ("wav.family", "daubechies4"),
    ("wav.j_lower", "3"),
    ("wav.cascade_levels", "12"),
    ("energy.level", "6"),
    ("fisher.hurst_grid", "0.78,0.8,0.85,0.9,0.95"),
];

/// Resolved key/value map; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::default();
        cfg.merge_text(&text)?;
        Ok(cfg)
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !self.values.contains_key(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply `--key value` or `--key=value` pairs.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<(), ConfigError> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let Some(stripped) = arg.strip_prefix("--") else {
                return Err(ConfigError::Invalid(format!("unexpected argument `{arg}`")));
            };
            if let Some((k, v)) = stripped.split_once('=') {
                self.set(k, v)?;
            } else {
                let v = it
                    .next()
                    .ok_or_else(|| ConfigError::MissingValue(stripped.to_string()))?;
                self.set(stripped, v)?;
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key `{key}` has no default"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        v.parse().map_err(|e: T::Err| ConfigError::Value {
            key: key.to_string(),
            value: v.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.raw(key);
        v.split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    /// Canonical `key=value` lines in key order.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out"))
    }
}

/// Strictly monotone grid check.
pub fn check_monotone(key: &str, grid: &[f64]) -> Result<(), ConfigError> {
    if grid.len() < 2 {
        return Ok(());
    }
    let inc = grid.windows(2).all(|w| w[1] > w[0]);
    let dec = grid.windows(2).all(|w| w[1] < w[0]);
    if inc || dec {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("`{key}` must be strictly monotone")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_overrides() {
        let mut c = Config::default();
        c.merge_text("# comment\nseed = 7\n\ntheta.hurst=0.9 # inline\n").unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), 7);
        c.apply_overrides(&["--seed".into(), "9".into(), "--eps=0.5".into()]).unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), 9);
        assert_eq!(c.get::<f64>("eps").unwrap(), 0.5);
        assert_eq!(c.get::<f64>("theta.hurst").unwrap(), 0.9);
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = Config::default();
        assert!(matches!(c.merge_text("nonsense"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(c.set("nope", "1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(
            c.apply_overrides(&["--seed".into()]),
            Err(ConfigError::MissingValue(_))
        ));
        c.set("seed", "x").unwrap();
        assert!(c.get::<u64>("seed").is_err());
        assert!(check_monotone("g", &[1.0, 2.0, 2.0]).is_err());
        assert!(check_monotone("g", &[3.0, 2.0, 1.0]).is_ok());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let mut b = Config::default();
        assert_eq!(a.hash(), b.hash());
        b.set("seed", "1").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
