//! Flat `key = value` scenario files.
//!
//! ```text
//! # canonical operating point
//! g_tau = 0.494
//! nbar = 0.03
//! alpha = auto
//! ```
//!
//! Unknown keys, duplicates and malformed values are all collected before
//! reporting. Keys that are absent take their canonical default and are listed
//! in [`ScenarioConfig::defaulted`].

use std::collections::HashMap;

use crate::error::{MaserError, Result};
use crate::fock::{FockCutoff, DEFAULT_TAIL_TOLERANCE};
use crate::mme::MicromaserParams;

/// The shipped canonical scenario.
pub const CANONICAL_CONFIG: &str = include_str!("../scenarios/canonical.conf");

/// Every accepted key, in the order used when echoing a configuration.
pub const KEYS: &[&str] = &[
    "g_tau",
    "g_over_gamma",
    "r_over_gamma",
    "nbar",
    "n_max",
    "tail_tolerance",
    "alpha",
    "t_end",
    "sample_spacing",
    "probe_g_tau_p",
    "shorttime_g_tau_p",
    "fit_start",
    "detection_atoms",
    "seed",
    "mcwf_trajectories",
    "mcwf_dt",
    "mcwf_t_end",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: MicromaserParams,
    pub n_max: usize,
    pub tail_tolerance: f64,
    /// Initial coherent amplitude; `None` matches the steady-state mean.
    pub alpha: Option<f64>,
    /// End of the time grid in γt; `None` picks a multiple of 1/D.
    pub t_end: Option<f64>,
    pub sample_spacing: f64,
    /// Probe phase for `probe`; `None` uses the pump phase.
    pub probe_g_tau_p: Option<f64>,
    pub shorttime_g_tau_p: f64,
    /// Start of the late-time fit window; `None` means 1.5/D.
    pub fit_start: Option<f64>,
    /// Probe atoms per interrogation time; 0 reports exact probabilities only.
    pub detection_atoms: u64,
    pub seed: u64,
    pub mcwf_trajectories: usize,
    pub mcwf_dt: f64,
    pub mcwf_t_end: f64,
    /// Keys that were missing and took their default.
    pub defaulted: Vec<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            params: MicromaserParams::canonical(),
            n_max: 80,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            alpha: None,
            t_end: None,
            sample_spacing: 0.5,
            probe_g_tau_p: None,
            shorttime_g_tau_p: 0.1,
            fit_start: None,
            detection_atoms: 0,
            seed: 1,
            mcwf_trajectories: 500,
            mcwf_dt: 1e-3,
            mcwf_t_end: 10.0,
            defaulted: Vec::new(),
        }
    }
}

fn auto_or<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl ScenarioConfig {
    pub fn cutoff(&self) -> Result<FockCutoff> {
        Ok(FockCutoff::new(self.n_max)?.with_tail_tolerance(self.tail_tolerance))
    }

    /// Key/value pairs in [`KEYS`] order, formatted as they would be parsed back.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let values = [
            p.g_tau.to_string(),
            p.g_over_gamma.to_string(),
            p.r_over_gamma.to_string(),
            p.nbar.to_string(),
            self.n_max.to_string(),
            self.tail_tolerance.to_string(),
            auto_or(&self.alpha),
            auto_or(&self.t_end),
            self.sample_spacing.to_string(),
            auto_or(&self.probe_g_tau_p),
            self.shorttime_g_tau_p.to_string(),
            auto_or(&self.fit_start),
            self.detection_atoms.to_string(),
            self.seed.to_string(),
            self.mcwf_trajectories.to_string(),
            self.mcwf_dt.to_string(),
            self.mcwf_t_end.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// Checks every field, returning all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if let Err(MaserError::InvalidParams(m)) = self.params.validate() {
            errs.extend(m.split("; ").map(str::to_string));
        }
        if self.n_max < 1 {
            errs.push("n_max must be ≥ 1".into());
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            errs.push(format!("tail_tolerance must be in (0, 1) (got {})", self.tail_tolerance));
        }
        let positive = |name: &str, v: f64, errs: &mut Vec<String>| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be > 0 (got {v})"));
            }
        };
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                errs.push(format!("alpha must be finite (got {a})"));
            }
        }
        if let Some(t) = self.t_end {
            positive("t_end", t, &mut errs);
        }
        positive("sample_spacing", self.sample_spacing, &mut errs);
        if let Some(x) = self.probe_g_tau_p {
            positive("probe_g_tau_p", x, &mut errs);
        }
        positive("shorttime_g_tau_p", self.shorttime_g_tau_p, &mut errs);
        if let Some(t) = self.fit_start {
            if !(t >= 0.0 && t.is_finite()) {
                errs.push(format!("fit_start must be ≥ 0 (got {t})"));
            }
        }
        if self.mcwf_trajectories < 1 {
            errs.push("mcwf_trajectories must be ≥ 1".into());
        }
        positive("mcwf_dt", self.mcwf_dt, &mut errs);
        positive("mcwf_t_end", self.mcwf_t_end, &mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(MaserError::Config(errs))
        }
    }
}

fn parse_f64(key: &str, v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>()
        .map_err(|_| format!("{key}: expected a number, got {v:?}"))
}

fn parse_auto(key: &str, v: &str) -> std::result::Result<Option<f64>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_f64(key, v).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("{key}: expected a non-negative integer, got {v:?}"))
}

fn assign(cfg: &mut ScenarioConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "g_tau" => cfg.params.g_tau = parse_f64(key, v)?,
        "g_over_gamma" => cfg.params.g_over_gamma = parse_f64(key, v)?,
        "r_over_gamma" => cfg.params.r_over_gamma = parse_f64(key, v)?,
        "nbar" => cfg.params.nbar = parse_f64(key, v)?,
        "n_max" => cfg.n_max = parse_int(key, v)?,
        "tail_tolerance" => cfg.tail_tolerance = parse_f64(key, v)?,
        "alpha" => cfg.alpha = parse_auto(key, v)?,
        "t_end" => cfg.t_end = parse_auto(key, v)?,
        "sample_spacing" => cfg.sample_spacing = parse_f64(key, v)?,
        "probe_g_tau_p" => cfg.probe_g_tau_p = parse_auto(key, v)?,
        "shorttime_g_tau_p" => cfg.shorttime_g_tau_p = parse_f64(key, v)?,
        "fit_start" => cfg.fit_start = parse_auto(key, v)?,
        "detection_atoms" => cfg.detection_atoms = parse_int(key, v)?,
        "seed" => cfg.seed = parse_int(key, v)?,
        "mcwf_trajectories" => cfg.mcwf_trajectories = parse_int(key, v)?,
        "mcwf_dt" => cfg.mcwf_dt = parse_f64(key, v)?,
        "mcwf_t_end" => cfg.mcwf_t_end = parse_f64(key, v)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Parses and validates a scenario document.
pub fn validate_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut errs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errs.push(format!("line {lineno}: expected `key = value`, got {line:?}"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            errs.push(format!("line {lineno}: missing key"));
            continue;
        }
        if let Some(first) = seen.get(k) {
            errs.push(format!("duplicate key {k:?} on lines {first} and {lineno}"));
            continue;
        }
        seen.insert(k.to_string(), lineno);
        if let Err(e) = assign(&mut cfg, k, v) {
            errs.push(format!("line {lineno}: {e}"));
        }
    }
    if seen.is_empty() && errs.is_empty() {
        return Err(MaserError::Config(vec!["configuration is empty".into()]));
    }
    if let Err(MaserError::Config(more)) = cfg.validate() {
        errs.extend(more);
    }
    if !errs.is_empty() {
        return Err(MaserError::Config(errs));
    }
    cfg.defaulted = KEYS
        .iter()
        .filter(|k| !seen.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    for k in &cfg.defaulted {
        log::info!("config: {k} not set, using default");
    }
    Ok(cfg)
}
