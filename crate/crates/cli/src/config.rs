//! Run configuration and its two file formats.
//!
//! The plain format has one `key = value` pair per line; values are JSON
//! literals (`1.5`, `[5.6, 5.8]`, `null`) or bare strings (`solve`).  Blank
//! lines and lines starting with `#` are ignored.  A file whose first
//! non-blank character is `{` is read as JSON.  Keys are the field names of
//! [`RunConfig`]; absent keys keep their current value.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Fiber,
    Extremal,
    Solve,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BranchChoice {
    Ground,
    Mp,
}

/// Every input of a run.  Defaults are listed beside each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Space dimension, default 3.
    pub dim: usize,
    /// Lower exponent; required.
    pub q: Option<f64>,
    /// Upper exponent; `null` means `2*`.
    pub p: Option<f64>,
    /// Prescribed mass `a`, default 1.
    pub mass: f64,
    /// Coupling; required by `fiber` and `solve`.
    pub mu: Option<f64>,
    /// Grid radius, default 40.
    pub grid_radius: f64,
    /// Grid intervals, default 4000.
    pub grid_intervals: usize,
    /// Relative energy tolerance, default 1e-10.
    pub tol: f64,
    /// Iteration cap, default 20000.
    pub max_iter: usize,
    /// Continuation exponents; empty means `2* - {0.4, 0.2, 0.1, 0.05}` for
    /// the critical mountain pass and a single run for `extremal`.
    pub p_seq: Vec<f64>,
    /// Branch for `solve`, default `ground`.
    pub branch: BranchChoice,
    /// Extremal estimate; couplings above it are rejected by `solve`.
    pub mu_star: Option<f64>,
    /// Norm triple `|grad u|^2`, `|u|_q^q`, `|u|_p^p` for `fiber`.
    pub grad2: Option<f64>,
    pub massq: Option<f64>,
    pub massp: Option<f64>,
    /// Radial function file (JSON) for `fiber`, instead of the triple.
    pub function: Option<PathBuf>,
    /// Masses for `extremal` (scaling-law row) and the `sweep` grid.
    pub masses: Vec<f64>,
    /// Couplings for the `sweep` grid.
    pub mus: Vec<f64>,
    /// Couplings `t` of the scalar-field family; empty means
    /// `2.10..2.30` step 0.01 followed by 29 geometric points up to 200.
    pub t_grid: Vec<f64>,
    /// Grid for the scalar-field family, default radius 30 with 6000 intervals.
    pub dual_radius: f64,
    pub dual_intervals: usize,
    /// Output path; stdout when absent.
    pub out: Option<PathBuf>,
    /// Seed for randomized audits, default 0.
    pub seed: u64,
    /// Worker threads for sweeps; 0 means one per core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Verify,
            dim: 3,
            q: None,
            p: None,
            mass: 1.0,
            mu: None,
            grid_radius: 40.0,
            grid_intervals: 4000,
            tol: 1e-10,
            max_iter: 20_000,
            p_seq: Vec::new(),
            branch: BranchChoice::Ground,
            mu_star: None,
            grad2: None,
            massq: None,
            massp: None,
            function: None,
            masses: Vec::new(),
            mus: Vec::new(),
            t_grid: Vec::new(),
            dual_radius: 30.0,
            dual_intervals: 6000,
            out: None,
            seed: 0,
            workers: 0,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    /// Overwrites the fields present in `text`.
    pub fn merge_text(&mut self, text: &str) -> Result<(), CliError> {
        let patch = if text.trim_start().starts_with('{') {
            match serde_json::from_str::<Value>(text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(usage("JSON config must be an object")),
                Err(e) => return Err(usage(format!("invalid JSON config: {e}"))),
            }
        } else {
            parse_pairs(text)?
        };
        let mut current = match serde_json::to_value(&*self) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("RunConfig serializes to an object"),
        };
        for (k, v) in patch {
            if !current.contains_key(&k) {
                return Err(usage(format!("unknown config key `{k}`")));
            }
            current.insert(k, v);
        }
        *self = serde_json::from_value(Value::Object(current))
            .map_err(|e| usage(format!("invalid config value: {e}")))?;
        Ok(())
    }

    #[cfg(test)]
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.merge_text(text)?;
        Ok(cfg)
    }

    /// The `key = value` form; [`RunConfig::from_text`] inverts it exactly.
    pub fn to_pairs(&self) -> String {
        let Ok(Value::Object(m)) = serde_json::to_value(self) else {
            unreachable!("RunConfig serializes to an object")
        };
        let mut out = String::new();
        for (k, v) in m {
            let text = match &v {
                Value::String(s) if serde_json::from_str::<Value>(s).is_err() && !s.trim().is_empty() && s.trim() == s => s.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(out, "{k} = {text}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("RunConfig serializes")
    }
}

fn parse_pairs(text: &str) -> Result<Map<String, Value>, CliError> {
    let mut map = Map::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("line {}: expected `key = value`", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        map.insert(k.to_string(), value);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            command: Command::Sweep,
            q: Some(8.0 / 3.0),
            p: Some(5.95),
            mu: Some(0.1 + 0.2),
            p_seq: vec![5.6, 5.8, 5.9],
            mus: vec![1.0 / 3.0, 2.0],
            function: Some(PathBuf::from("profile.json")),
            out: Some(PathBuf::from("out dir/rows.csv")),
            seed: u64::MAX,
            ..RunConfig::default()
        }
    }

    #[test]
    fn pairs_round_trip_losslessly() {
        let cfg = sample();
        assert_eq!(RunConfig::from_text(&cfg.to_pairs()).unwrap(), cfg);
        assert_eq!(RunConfig::from_text(&RunConfig::default().to_pairs()).unwrap(), RunConfig::default());
    }

    #[test]
    fn json_round_trips_losslessly() {
        let cfg = sample();
        assert_eq!(RunConfig::from_text(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_files_keep_other_fields() {
        let mut cfg = sample();
        cfg.merge_text("# comment\n\nmass = 2\nbranch = mp\n").unwrap();
        assert_eq!(cfg.mass, 2.0);
        assert_eq!(cfg.branch, BranchChoice::Mp);
        assert_eq!(cfg.p_seq, vec![5.6, 5.8, 5.9]);
    }

    #[test]
    fn bad_files_are_usage_errors() {
        assert!(matches!(RunConfig::from_text("nonsense"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_text("colour = red"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_text("mass = heavy"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_text("[1, 2]\n"), Err(CliError::Usage(_))));
    }
}
