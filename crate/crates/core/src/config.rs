//! Plain-text `key = value` run configuration.
//!
//! Every known key has a default; a file or `--set` override may only name
//! known keys. `#` starts a comment. The resolved key/value map doubles as the
//! reproducibility snapshot written to the run manifest.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hjbvi::{Grid, HowardConfig};
use crate::model::{ModelParams, RawParams};
use crate::simulate::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Float,
    Count,
    Seed,
    Floats,
    Words,
}

const KEYS: &[(&str, Kind, &str)] = &[
    ("alpha", Kind::Float, "0.1"),
    ("beta", Kind::Float, "0.1"),
    ("phi_max", Kind::Float, "3"),
    ("c", Kind::Float, "1"),
    ("p", Kind::Float, "0.25"),
    ("lambda", Kind::Float, "0.2"),
    ("delta", Kind::Float, "0.08"),
    ("sigma", Kind::Float, "1.85"),
    ("x_reserve", Kind::Float, "0.1"),
    ("grid.x_max", Kind::Float, "1.0"),
    ("grid.n", Kind::Count, "2001"),
    ("howard.tol", Kind::Float, "1e-9"),
    ("howard.max_iter", Kind::Count, "200"),
    ("sim.dt", Kind::Float, "0.001"),
    ("sim.horizon", Kind::Float, "200"),
    ("sim.n_paths", Kind::Count, "10000"),
    ("sim.seed", Kind::Seed, "42"),
    ("sim.x0", Kind::Float, "0.1"),
    ("sim.export_paths", Kind::Count, "20"),
    ("sim.deviations", Kind::Words, "zero,double,half"),
    ("fb.x_max", Kind::Float, "6"),
    ("fb.n", Kind::Count, "121"),
    ("fb.t_max", Kind::Float, "50"),
    ("fb.nt", Kind::Count, "101"),
    ("voi.x_max", Kind::Float, "0.95"),
    ("voi.n", Kind::Count, "96"),
    ("sweep.sigmas", Kind::Floats, "1.5,1.85,2.2"),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, kind, _)| *kind)
}

fn check_value(key: &str, kind: Kind, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("`{key}` expects {what}, got `{value}`"));
    match kind {
        Kind::Float => value.parse::<f64>().map(|_| ()).map_err(|_| bad("a number")),
        Kind::Count => value.parse::<usize>().map(|_| ()).map_err(|_| bad("a non-negative integer")),
        Kind::Seed => value.parse::<u64>().map(|_| ()).map_err(|_| bad("a 64-bit unsigned integer")),
        Kind::Floats => value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .try_for_each(|s| s.parse::<f64>().map(|_| ()))
            .map_err(|_| bad("a comma-separated list of numbers")),
        Kind::Words => Ok(()),
    }
}

/// Resolved configuration: every known key mapped to its textual value.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, _, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl Config {
    pub fn known_keys() -> impl Iterator<Item = &'static str> {
        KEYS.iter().map(|(k, _, _)| *k)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        let kind = kind_of(key).ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        check_value(key, kind, value)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(k, v)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.apply(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("`{key}` is not a known key"))
    }

    pub fn float(&self, key: &str) -> f64 {
        self.get(key).parse().expect("validated on insert")
    }

    pub fn count(&self, key: &str) -> usize {
        self.get(key).parse().expect("validated on insert")
    }

    pub fn floats(&self, key: &str) -> Vec<f64> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().expect("validated on insert"))
            .collect()
    }

    pub fn snapshot(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// `key = value` lines that reproduce this configuration.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn raw_params(&self) -> RawParams {
        RawParams {
            alpha: self.float("alpha"),
            beta: self.float("beta"),
            phi_max: self.float("phi_max"),
            c: self.float("c"),
            p: self.float("p"),
            lambda: self.float("lambda"),
            delta: self.float("delta"),
            sigma: self.float("sigma"),
            x_reserve: self.float("x_reserve"),
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        self.raw_params().validate()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.float("grid.x_max"), self.count("grid.n"))
    }

    pub fn howard(&self) -> Result<HowardConfig> {
        let cfg = HowardConfig {
            tol: self.float("howard.tol"),
            max_iter: self.count("howard.max_iter"),
        };
        if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
            return Err(Error::Config("howard.tol must be > 0 and howard.max_iter >= 1".into()));
        }
        Ok(cfg)
    }

    pub fn sim(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            dt: self.float("sim.dt"),
            horizon: self.float("sim.horizon"),
            n_paths: self.count("sim.n_paths"),
            seed: self.get("sim.seed").parse().expect("validated on insert"),
            record_paths: self.count("sim.export_paths"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
