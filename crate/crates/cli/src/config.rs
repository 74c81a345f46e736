//! Run settings from a JSON file and command-line flags; flags take precedence.

use std::path::PathBuf;

use bcslab_core::foundation::FourierTable;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Reference,
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Closed,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

/// Every setting any subcommand reads. Unset values fall back to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Schema version of a config file; must be 1 when present.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    /// Subcommand a config file is meant for.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,

    /// Potential kind: gaussian-well or user-table (the table comes from the config file).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<FourierTable>,
    /// Depth of the Gaussian interaction V.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Radial grid cutoff and node count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pmax: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Temperature; defaults to 0.9·Tc where a reference state is needed.
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,

    /// Box side length, points per dimension, dimension and scale parameter.
    #[arg(long = "L")]
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_list: Option<Vec<f64>>,
    /// Depth and width of the Gaussian external potential W.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_depth: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_width: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Convergence or pass tolerance of the command.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maxiter: Option<usize>,
    /// Anderson history depth; 0 runs the plain damped iteration.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anderson: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    /// BCS state file (JSON); the reference state is used when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
    /// Writes the evaluated state to this path.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub save_state: Option<PathBuf>,
    /// Binary pair-field file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    /// Fourier cutoffs of the tail and splitting estimates.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,

    /// Quasiparticle energies of the ζ kernel.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ep: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Output path; standard output when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn to_map(s: &Settings) -> Map<String, Value> {
    match serde_json::to_value(s) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn flag_name(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

/// Reads a config file, rejecting unknown keys and foreign schema versions.
pub fn read_file(path: &std::path::Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let s: Settings = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    if let Some(v) = s.schema {
        if v != 1 {
            return Err(CliError::Usage(format!("config field 'schema': expected 1, got {v}")));
        }
    }
    Ok(s)
}

/// Overlays flag values on file values, warning where both are set and differ.
pub fn merge(file: Settings, flags: Settings, command: &str) -> Result<Settings, CliError> {
    if let Some(c) = &file.command {
        if c != command {
            return Err(CliError::Usage(format!("config field 'command': file is for '{c}', running '{command}'")));
        }
    }
    let mut merged = to_map(&file);
    for (k, v) in to_map(&flags) {
        if let Some(old) = merged.get(&k) {
            if *old != v {
                log::warn!("{} = {v} overrides the config value {old}", flag_name(&k));
            }
        }
        merged.insert(k, v);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("settings: {e}")))
}

/// Fails with a message naming `field` unless `ok`.
pub fn require(ok: bool, field: &str, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("field '{field}': {what}")))
    }
}

impl Settings {
    /// Checks shared numeric constraints; command-specific requirements are checked where used.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("tol", self.tol),
            ("width", self.width),
            ("pmax", self.pmax),
            ("T", self.t),
            ("beta", self.beta),
            ("L", self.length),
            ("h", self.h),
            ("w_width", self.w_width),
            ("damping", self.damping),
            ("r", self.r),
            ("s", self.s),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                require(v > 0.0 && v.is_finite(), name, "must be positive and finite")?;
            }
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("ep", self.ep), ("eq", self.eq)] {
            if let Some(v) = v {
                require(v >= 0.0 && v.is_finite(), name, "must be nonnegative and finite")?;
            }
        }
        for (name, v) in [("count", self.count), ("samples", self.samples), ("dim", self.dim), ("maxiter", self.maxiter), ("terms", self.terms)] {
            if let Some(v) = v {
                require(v > 0, name, "must be positive")?;
            }
        }
        if let Some(d) = self.damping {
            require(d <= 1.0, "damping", "must lie in (0, 1]")?;
        }
        if let Some(hs) = &self.h_list {
            require(hs.len() >= 3, "h_list", "needs at least three values")?;
            require(hs.iter().all(|h| *h > 0.0 && h.is_finite()), "h_list", "values must be positive")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<Settings, _> = serde_json::from_str(r#"{"depth": -5.0, "bogus": 1}"#);
        assert!(r.is_err());
        let s: Settings = serde_json::from_str(r#"{"depth": -5.0, "T": 0.5, "L": 8.0, "h_list": [0.4, 0.2, 0.1]}"#).unwrap();
        assert_eq!((s.t, s.length), (Some(0.5), Some(8.0)));
    }

    #[test]
    fn flags_override_file() {
        let file = Settings { depth: Some(-5.0), t: Some(1.0), ..Default::default() };
        let flags = Settings { t: Some(2.0), seed: Some(3), ..Default::default() };
        let m = merge(file, flags, "gap").unwrap();
        assert_eq!((m.depth, m.t, m.seed), (Some(-5.0), Some(2.0), Some(3)));
    }

    #[test]
    fn command_mismatch_and_bad_values() {
        let file = Settings { command: Some("tc".into()), ..Default::default() };
        assert!(merge(file, Settings::default(), "gap").is_err());
        assert!(Settings { tol: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(Settings { h_list: Some(vec![0.4, 0.2]), ..Default::default() }.validate().is_err());
        assert!(Settings { tol: Some(1e-8), ..Default::default() }.validate().is_ok());
    }
}
