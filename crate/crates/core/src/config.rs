//! Flat `key = value` case configuration.
//!
//! Entries are separated by newlines or commas and `#` starts a comment.
//! Unknown keys are rejected; missing keys keep their defaults and are
//! reported through `log::info!`.

use crate::basestate::{PhototaxisCurve, SuspensionParams, DEFAULT_N_Z};
use crate::error::{Error, Result};
use crate::perturb::{DEFAULT_N_AZIMUTH, DEFAULT_N_POLAR};
use crate::radiative::DEFAULT_N_TAU;
use std::collections::BTreeSet;

/// Every accepted key, in canonical order.
pub const KEYS: [&str; 16] = [
    "Sc",
    "Vc",
    "tauH",
    "omega",
    "A1",
    "B",
    "theta_i_deg",
    "n0",
    "Upsilon",
    "n_tau",
    "n_z",
    "n_polar",
    "n_azimuth",
    "k_min",
    "k_max",
    "n_k",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub params: SuspensionParams,
    pub n_tau: usize,
    pub n_z: usize,
    pub n_polar: usize,
    pub n_azimuth: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            params: SuspensionParams::default(),
            n_tau: DEFAULT_N_TAU,
            n_z: DEFAULT_N_Z,
            n_polar: DEFAULT_N_POLAR,
            n_azimuth: DEFAULT_N_AZIMUTH,
            k_min: 1.0,
            k_max: 5.0,
            n_k: 17,
        }
    }
}

fn range_err(key: &str, detail: impl Into<String>) -> Error {
    Error::ConfigRange {
        key: key.to_string(),
        detail: detail.into(),
    }
}

fn parse_f64(key: &str, raw: &str, line: usize) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| Error::ConfigParse {
        line,
        detail: format!("`{key}` expects a number, got `{raw}`"),
    })?;
    if !v.is_finite() {
        return Err(range_err(key, format!("{v} is not finite")));
    }
    Ok(v)
}

fn parse_usize(key: &str, raw: &str, line: usize) -> Result<usize> {
    raw.parse().map_err(|_| Error::ConfigParse {
        line,
        detail: format!("`{key}` expects a non-negative integer, got `{raw}`"),
    })
}

impl CaseConfig {
    /// Value of `key` formatted for the run log and result records.
    pub fn value_of(&self, key: &str) -> Option<String> {
        let p = &self.params;
        Some(match key {
            "Sc" => p.sc.to_string(),
            "Vc" => p.vc.to_string(),
            "tauH" => p.tau_h.to_string(),
            "omega" => p.omega.to_string(),
            "A1" => p.a1.to_string(),
            "B" => p.b.to_string(),
            "theta_i_deg" => p.theta_i_deg.to_string(),
            "n0" => p.n0.to_string(),
            "Upsilon" => p.curve.upsilon.to_string(),
            "n_tau" => self.n_tau.to_string(),
            "n_z" => self.n_z.to_string(),
            "n_polar" => self.n_polar.to_string(),
            "n_azimuth" => self.n_azimuth.to_string(),
            "k_min" => self.k_min.to_string(),
            "k_max" => self.k_max.to_string(),
            "n_k" => self.n_k.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.sc > 0.0) {
            return Err(range_err("Sc", "must be > 0"));
        }
        if !(p.vc >= 0.0) {
            return Err(range_err("Vc", "must be >= 0"));
        }
        if !(p.tau_h > 0.0) {
            return Err(range_err("tauH", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&p.omega) {
            return Err(range_err("omega", "must lie in [0, 1]"));
        }
        if !(-1.0..=1.0).contains(&p.a1) {
            return Err(range_err("A1", "must lie in [-1, 1]"));
        }
        if !(p.b >= 0.0) {
            return Err(range_err("B", "must be >= 0"));
        }
        if !(0.0..90.0).contains(&p.theta_i_deg) {
            return Err(range_err("theta_i_deg", "must lie in [0, 90)"));
        }
        if !(p.n0 >= 1.0) {
            return Err(range_err("n0", "must be >= 1"));
        }
        if !(p.curve.upsilon >= 0.0) {
            return Err(range_err("Upsilon", "must be >= 0"));
        }
        if self.n_tau < 8 {
            return Err(range_err("n_tau", "need at least 8 points"));
        }
        if self.n_z < 65 {
            return Err(range_err("n_z", "need at least 65 points"));
        }
        if self.n_polar < 2 {
            return Err(range_err("n_polar", "need at least 2 nodes"));
        }
        if self.n_azimuth < 4 || !self.n_azimuth.is_multiple_of(2) {
            return Err(range_err("n_azimuth", "need an even count >= 4"));
        }
        if !(self.k_min > 0.0) {
            return Err(range_err("k_min", "must be > 0"));
        }
        if !(self.k_max > self.k_min) {
            return Err(range_err("k_max", "must exceed k_min"));
        }
        if self.n_k < 2 {
            return Err(range_err("n_k", "need at least 2 wavenumbers"));
        }
        p.validate()
    }
}

/// Parses a configuration document; see the module docs for the format.
pub fn parse_config(text: &str) -> Result<CaseConfig> {
    let mut cfg = CaseConfig::default();
    let mut seen = BTreeSet::new();
    let mut upsilon = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw_line.split('#').next().unwrap_or("");
        for entry in body.split(',') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (key, value) = entry.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                detail: format!("expected `key = value`, got `{entry}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let key = KEYS.iter().copied().find(|k| *k == key).ok_or_else(|| Error::ConfigParse {
                line,
                detail: format!("unknown key `{key}`"),
            })?;
            if !seen.insert(key) {
                return Err(Error::ConfigParse {
                    line,
                    detail: format!("duplicate key `{key}`"),
                });
            }
            let p = &mut cfg.params;
            match key {
                "Sc" => p.sc = parse_f64(key, value, line)?,
                "Vc" => p.vc = parse_f64(key, value, line)?,
                "tauH" => p.tau_h = parse_f64(key, value, line)?,
                "omega" => p.omega = parse_f64(key, value, line)?,
                "A1" => p.a1 = parse_f64(key, value, line)?,
                "B" => p.b = parse_f64(key, value, line)?,
                "theta_i_deg" => p.theta_i_deg = parse_f64(key, value, line)?,
                "n0" => p.n0 = parse_f64(key, value, line)?,
                "Upsilon" => upsilon = Some(parse_f64(key, value, line)?),
                "n_tau" => cfg.n_tau = parse_usize(key, value, line)?,
                "n_z" => cfg.n_z = parse_usize(key, value, line)?,
                "n_polar" => cfg.n_polar = parse_usize(key, value, line)?,
                "n_azimuth" => cfg.n_azimuth = parse_usize(key, value, line)?,
                "k_min" => cfg.k_min = parse_f64(key, value, line)?,
                "k_max" => cfg.k_max = parse_f64(key, value, line)?,
                "n_k" => cfg.n_k = parse_usize(key, value, line)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
    }
    if let Some(u) = upsilon {
        if !(u >= 0.0) {
            return Err(range_err("Upsilon", "must be >= 0"));
        }
        let mut curve = PhototaxisCurve::with_upsilon(u, f64::NAN);
        curve.gc = curve.root().map_err(|e| range_err("Upsilon", e.to_string()))?;
        cfg.params.curve = curve;
    }
    cfg.validate()?;
    for key in KEYS.iter().filter(|k| !seen.contains(*k)) {
        log::info!("config: {key} defaulted to {}", cfg.value_of(key).unwrap_or_default());
    }
    Ok(cfg)
}
