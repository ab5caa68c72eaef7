//! Run configuration and its flat `key=value` file format.
//!
//! Recognised keys: `n`, `horizon`, `alpha`, `mu`, `xi`, `seed`,
//! `prior_positive`, `penalty_L`, `reward_R`, `cost_max`. Blank lines and
//! lines starting with `#` are ignored; omitted keys keep their defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Pool size.
    pub n: usize,
    pub horizon: usize,
    /// Error threshold; the target accuracy is `1 - alpha`.
    pub alpha: f64,
    /// Confidence parameter of the Hoeffding bounds.
    pub mu: f64,
    /// Accuracy-range slack: the optimistic problem is solved at `alpha - xi`.
    pub xi: f64,
    pub seed: u64,
    pub prior_positive: f64,
    pub penalty_l: f64,
    pub reward_r: f64,
    /// Upper end of bid grids.
    pub cost_max: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 110,
            horizon: 10_000,
            alpha: 0.1,
            mu: 0.05,
            xi: 0.05,
            seed: 1,
            prior_positive: 0.5,
            penalty_l: 1000.0,
            reward_r: 0.0,
            cost_max: 20.0,
        }
    }
}

const KEYS: [&str; 10] = [
    "n",
    "horizon",
    "alpha",
    "mu",
    "xi",
    "seed",
    "prior_positive",
    "penalty_L",
    "reward_R",
    "cost_max",
];

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl RunConfig {
    /// Threshold used when optimizing on upper confidence bounds.
    pub fn optimistic_alpha(&self) -> f64 {
        self.alpha - self.xi
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        if self.horizon == 0 {
            return fail("horizon must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha {} not in (0,1)", self.alpha));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return fail(format!("mu {} not in (0,1)", self.mu));
        }
        if !(self.xi >= 0.0 && self.xi < self.alpha) {
            return fail(format!(
                "xi {} must satisfy 0 <= xi < alpha so that 1-alpha+xi < 1",
                self.xi
            ));
        }
        if !(0.0..=1.0).contains(&self.prior_positive) {
            return fail(format!(
                "prior_positive {} not in [0,1]",
                self.prior_positive
            ));
        }
        if !(self.penalty_l >= 0.0 && self.reward_r >= 0.0) {
            return fail("penalty_L and reward_R must be non-negative".into());
        }
        if !(self.cost_max > 0.0 && self.cost_max.is_finite()) {
            return fail("cost_max must be positive".into());
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: trimmed.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let Some(&canonical) = KEYS.iter().find(|k| **k == key) else {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            };
            if seen.contains(&canonical) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(canonical);
            match canonical {
                "n" => cfg.n = parse_value(line, key, value)?,
                "horizon" => cfg.horizon = parse_value(line, key, value)?,
                "alpha" => cfg.alpha = parse_value(line, key, value)?,
                "mu" => cfg.mu = parse_value(line, key, value)?,
                "xi" => cfg.xi = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "prior_positive" => cfg.prior_positive = parse_value(line, key, value)?,
                "penalty_L" => cfg.penalty_l = parse_value(line, key, value)?,
                "reward_R" => cfg.reward_r = parse_value(line, key, value)?,
                "cost_max" => cfg.cost_max = parse_value(line, key, value)?,
                _ => unreachable!(),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "horizon={}", self.horizon)?;
        writeln!(f, "alpha={}", self.alpha)?;
        writeln!(f, "mu={}", self.mu)?;
        writeln!(f, "xi={}", self.xi)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "prior_positive={}", self.prior_positive)?;
        writeln!(f, "penalty_L={}", self.penalty_l)?;
        writeln!(f, "reward_R={}", self.reward_r)?;
        writeln!(f, "cost_max={}", self.cost_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trips() {
        let cfg = RunConfig {
            n: 11,
            seed: 99,
            xi: 0.0,
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_defaults() {
        let cfg = RunConfig::parse("# scaled\n\nn = 44\nalpha=0.2\n").unwrap();
        assert_eq!(cfg.n, 44);
        assert_eq!(cfg.alpha, 0.2);
        assert_eq!(cfg.horizon, RunConfig::default().horizon);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(
            RunConfig::parse("penalty_l=3"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("n=3\nn=4"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            RunConfig::parse("n"),
            Err(ConfigError::Syntax { .. })
        ));
        assert!(matches!(
            RunConfig::parse("alpha=abc"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn rejects_slack_that_reaches_full_accuracy() {
        assert!(RunConfig::parse("alpha=0.1\nxi=0.1").is_err());
        assert!(RunConfig::parse("alpha=0.1\nxi=0.05").is_ok());
    }
}
