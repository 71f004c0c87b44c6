//! Settings for `simulate`: defaults, a flat `key = value` config file, and
//! command-line flags, applied in that order.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use mvgls::{OmegaMode, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_T: [usize; 5] = [200, 400, 800, 1600, 3200];
pub const DEFAULT_CELLS: [Cell; 4] = [Cell { n: 6, k: 3 }, Cell { n: 6, k: 5 }, Cell { n: 25, k: 3 }, Cell { n: 25, k: 5 }];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Heteroskedastic errors.
    Table1,
    /// Heteroskedastic and VAR(1) errors.
    Table2,
}

impl Preset {
    pub fn config(self, n: usize, k: usize, t: usize) -> SimConfig {
        match self {
            Preset::Table1 => SimConfig::case_i(n, k, t),
            Preset::Table2 => SimConfig::case_ii(n, k, t),
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Preset::Table1 => "heteroskedastic errors",
            Preset::Table2 => "heteroskedastic and autocorrelated errors",
        }
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table1" => Ok(Preset::Table1),
            "table2" => Ok(Preset::Table2),
            other => Err(CliError::Config(format!("unknown preset `{other}` (expected table1 or table2)"))),
        }
    }
}

/// An `N`/`k` combination written `N6K3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub k: usize,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{}K{}", self.n, self.k)
    }
}

impl FromStr for Cell {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CliError::Config(format!("cell `{s}` is not of the form N6K3"));
        let upper = s.trim().to_ascii_uppercase();
        let rest = upper.strip_prefix('N').ok_or_else(bad)?;
        let (n, k) = rest.split_once('K').ok_or_else(bad)?;
        let cell = Cell {
            n: n.parse().map_err(|_| bad())?,
            k: k.parse().map_err(|_| bad())?,
        };
        if cell.n == 0 || cell.k == 0 {
            return Err(bad());
        }
        Ok(cell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaChoice {
    PerReplication,
    Fixed,
}

impl FromStr for OmegaChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "per-replication" => Ok(OmegaChoice::PerReplication),
            "fixed" => Ok(OmegaChoice::Fixed),
            other => Err(CliError::Config(format!(
                "unknown omega mode `{other}` (expected per-replication or fixed)"
            ))),
        }
    }
}

/// Fully resolved settings; echoed in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSettings {
    pub presets: Vec<Preset>,
    pub cells: Vec<Cell>,
    #[serde(rename = "T")]
    pub t_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub p_min: usize,
    pub p_max: usize,
    pub rho: f64,
    pub x_ar: f64,
    pub omega: OmegaChoice,
    pub levels: Vec<f64>,
}

/// Settings where every field may be absent; layered over the defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialSettings {
    pub presets: Option<Vec<Preset>>,
    pub cells: Option<Vec<Cell>>,
    pub t_values: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub p_min: Option<usize>,
    pub p_max: Option<usize>,
    pub rho: Option<f64>,
    pub x_ar: Option<f64>,
    pub omega: Option<OmegaChoice>,
    pub levels: Option<Vec<f64>>,
    pub workers: Option<usize>,
}

impl PartialSettings {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: PartialSettings) -> PartialSettings {
        PartialSettings {
            presets: other.presets.or(self.presets),
            cells: other.cells.or(self.cells),
            t_values: other.t_values.or(self.t_values),
            reps: other.reps.or(self.reps),
            seed: other.seed.or(self.seed),
            p_min: other.p_min.or(self.p_min),
            p_max: other.p_max.or(self.p_max),
            rho: other.rho.or(self.rho),
            x_ar: other.x_ar.or(self.x_ar),
            omega: other.omega.or(self.omega),
            levels: other.levels.or(self.levels),
            workers: other.workers.or(self.workers),
        }
    }

    /// Loads a previous run's settings from its manifest.
    pub fn from_settings(s: SimulateSettings) -> Self {
        PartialSettings {
            presets: Some(s.presets),
            cells: Some(s.cells),
            t_values: Some(s.t_values),
            reps: Some(s.reps),
            seed: Some(s.seed),
            p_min: Some(s.p_min),
            p_max: Some(s.p_max),
            rho: Some(s.rho),
            x_ar: Some(s.x_ar),
            omega: Some(s.omega),
            levels: Some(s.levels),
            workers: None,
        }
    }

    /// Fills unset fields with defaults; a missing seed is drawn at random.
    pub fn resolve(self) -> Result<SimulateSettings> {
        let base = SimConfig::case_i(6, 3, 200);
        let s = SimulateSettings {
            presets: self.presets.unwrap_or_else(|| vec![Preset::Table1, Preset::Table2]),
            cells: self.cells.unwrap_or_else(|| DEFAULT_CELLS.to_vec()),
            t_values: self.t_values.unwrap_or_else(|| DEFAULT_T.to_vec()),
            reps: self.reps.unwrap_or(base.reps),
            seed: self.seed.unwrap_or_else(rand::random),
            p_min: self.p_min.unwrap_or(base.p_min),
            p_max: self.p_max.unwrap_or(base.p_max),
            rho: self.rho.unwrap_or(base.rho),
            x_ar: self.x_ar.unwrap_or(base.x_ar),
            omega: self.omega.unwrap_or(OmegaChoice::PerReplication),
            levels: self.levels.unwrap_or(base.levels),
        };
        if s.presets.is_empty() || s.cells.is_empty() || s.t_values.is_empty() {
            return Err(CliError::Config("presets, cells and T must not be empty".into()));
        }
        for cfg in s.configs() {
            cfg.1.validate()?;
        }
        Ok(s)
    }
}

impl SimulateSettings {
    /// Every grid point, ordered by preset, cell, then `T`.
    pub fn configs(&self) -> Vec<(Preset, SimConfig)> {
        let mut out = Vec::new();
        for &preset in &self.presets {
            for cell in &self.cells {
                for &t in &self.t_values {
                    let cfg = SimConfig {
                        reps: self.reps,
                        seed: self.seed,
                        p_min: self.p_min,
                        p_max: self.p_max,
                        rho: self.rho,
                        x_ar: self.x_ar,
                        omega_mode: match self.omega {
                            OmegaChoice::PerReplication => OmegaMode::PerReplication,
                            OmegaChoice::Fixed => OmegaMode::Fixed,
                        },
                        levels: self.levels.clone(),
                        ..preset.config(cell.n, cell.k, t)
                    };
                    out.push((preset, cfg));
                }
            }
        }
        out
    }
}

pub fn split_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("`{}` is not a valid {what}", p.trim())))
        })
        .collect()
}

fn parse_cells(s: &str) -> Result<Vec<Cell>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(Cell::from_str).collect()
}

fn parse_presets(s: &str) -> Result<Vec<Preset>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(Preset::from_str).collect()
}

/// Reads a flat `key = value` file (a TOML subset: no tables).
pub fn read_config_file(path: &Path) -> Result<PartialSettings> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn parse_config(text: &str) -> Result<PartialSettings> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    let mut out = PartialSettings::default();
    for (key, value) in &table {
        let key_norm = key.replace('-', "_");
        match key_norm.as_str() {
            "preset" | "presets" => out.presets = Some(parse_presets(&scalar_list(key, value)?)?),
            "cells" => out.cells = Some(parse_cells(&scalar_list(key, value)?)?),
            "T" | "t" => out.t_values = Some(split_list(&scalar_list(key, value)?, "sample size")?),
            "reps" => out.reps = Some(integer(key, value)?),
            "seed" => out.seed = Some(integer(key, value)?),
            "workers" => out.workers = Some(integer(key, value)?),
            "p_min" => out.p_min = Some(integer(key, value)?),
            "p_max" => out.p_max = Some(integer(key, value)?),
            "rho" => out.rho = Some(float(key, value)?),
            "x_ar" => out.x_ar = Some(float(key, value)?),
            "omega" => out.omega = Some(scalar_list(key, value)?.parse()?),
            "levels" => out.levels = Some(split_list(&scalar_list(key, value)?, "level")?),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
    }
    Ok(out)
}

/// A string, number, or array of them, rendered as a comma-separated list.
fn scalar_list(key: &str, value: &toml::Value) -> Result<String> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Array(items) => {
            let parts: Result<Vec<String>> = items.iter().map(|v| scalar_list(key, v)).collect();
            Ok(parts?.join(","))
        }
        _ => Err(CliError::Config(format!("`{key}` must be a string, number or list"))),
    }
}

fn integer<T: TryFrom<i64>>(key: &str, value: &toml::Value) -> Result<T> {
    value
        .as_integer()
        .and_then(|i| T::try_from(i).ok())
        .ok_or_else(|| CliError::Config(format!("`{key}` must be a non-negative integer")))
}

fn float(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(CliError::Config(format!("`{key}` must be a number"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_parse() {
        assert_eq!("N6K3".parse::<Cell>().unwrap(), Cell { n: 6, k: 3 });
        assert_eq!("n25k5".parse::<Cell>().unwrap(), Cell { n: 25, k: 5 });
        assert!("6K3".parse::<Cell>().is_err());
        assert!("N0K3".parse::<Cell>().is_err());
        assert_eq!(Cell { n: 25, k: 3 }.to_string(), "N25K3");
    }

    #[test]
    fn config_file_values() {
        let p = parse_config(
            "preset = \"table2\"\ncells = \"N6K3,N25K3\"\nT = [400, 800]\nreps = 50\nseed = 7\nlevels = [0.05]\nrho = 0\n",
        )
        .unwrap();
        assert_eq!(p.presets, Some(vec![Preset::Table2]));
        assert_eq!(p.cells.as_ref().unwrap().len(), 2);
        assert_eq!(p.t_values, Some(vec![400, 800]));
        assert_eq!(p.reps, Some(50));
        assert_eq!(p.seed, Some(7));
        assert_eq!(p.levels, Some(vec![0.05]));
        assert_eq!(p.rho, Some(0.0));
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("reps = -1").is_err());
        assert!(parse_config("[table]\nx = 1").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config("reps = 50\nseed = 7").unwrap();
        let flags = PartialSettings {
            reps: Some(10),
            ..Default::default()
        };
        let s = file.overlay(flags).resolve().unwrap();
        assert_eq!((s.reps, s.seed), (10, 7));
        assert_eq!(s.configs().len(), 2 * 4 * 5);
    }

    #[test]
    fn invalid_grid_rejected() {
        let zero = PartialSettings {
            reps: Some(0),
            seed: Some(1),
            ..Default::default()
        };
        assert!(matches!(zero.resolve(), Err(CliError::Config(_))));
        let tiny = PartialSettings {
            t_values: Some(vec![20]),
            seed: Some(1),
            ..Default::default()
        };
        assert!(matches!(tiny.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn settings_round_trip_through_json() {
        let s = PartialSettings {
            seed: Some(3),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let back: SimulateSettings = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
        assert_eq!(PartialSettings::from_settings(back).resolve().unwrap(), s);
    }
}
