//! `key = value` configuration files. Flags given on the command line win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use steercert::model::{Family, SteeringInequality};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "family", "alpha", "beta", "grid_min", "grid_max", "grid_points", "tol", "seed", "output", "workers", "eps",
    "delta", "slope", "draws",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("config line {}: expected key = value", n + 1)))?;
            let k = k.trim().replace('-', "_");
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Input(format!("config line {}: unknown key '{k}'", n + 1)));
            }
            map.insert(k, v.trim().to_string());
        }
        Ok(ConfigFile(map))
    }

    /// Flag value, else config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Input(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }
}

/// Resolved settings shared by the subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub family: Family,
    pub alpha: f64,
    pub beta: f64,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_points: usize,
    pub tol: f64,
    pub output: Option<PathBuf>,
    pub workers: usize,
}

impl RunConfig {
    /// The inequality, validated against the family's region.
    pub fn inequality(&self) -> Result<SteeringInequality, CliError> {
        SteeringInequality::new(self.family, self.alpha, self.beta).map_err(|e| CliError::Input(e.to_string()))
    }

    /// `grid_points` values between the grid limits, defaulting to `[lo, hi]`.
    pub fn grid(&self, lo: f64, hi: f64) -> Result<Vec<f64>, CliError> {
        let a = self.grid_min.unwrap_or(lo);
        let b = self.grid_max.unwrap_or(hi);
        if !(a <= b) || !a.is_finite() || !b.is_finite() {
            return Err(CliError::Input(format!("empty grid [{a}, {b}]")));
        }
        Ok(match self.grid_points {
            0 => return Err(CliError::Input("grid_points must be positive".into())),
            1 => vec![b],
            n => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        })
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let c = ConfigFile::parse("alpha = 0.5\n# note\nbeta=2 # trailing\n").unwrap();
        assert_eq!(c.pick(None, "alpha", 0.0).unwrap(), 0.5);
        assert_eq!(c.pick(Some(1.0), "alpha", 0.0).unwrap(), 1.0);
        assert_eq!(c.pick(None, "tol", 1e-6).unwrap(), 1e-6);
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(c.pick::<u64>(None, "beta", 0).is_ok());
    }
}
