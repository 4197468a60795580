//! Experiment configuration: a strict TOML document whose defaults
//! reproduce the full paper setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationOptions, DEFAULT_GROWTH, DEFAULT_RESOLUTION, DEFAULT_TARGET, DEFAULT_TF_CAP};
use crate::conditions::PairSet;
use crate::ensemble::{ParamKind, DEFAULT_ENSEMBLE_SIZE, DEFAULT_HIST_BINS, DEFAULT_SCAN_POINTS, MAX_SIGMA_REL};
use crate::error::{Error, Result};
use crate::model::{DEFAULT_EPSILON0, DEFAULT_MAX_QUBITS, IDEAL_H, IDEAL_J, IDEAL_LAMBDA};
use crate::propagation::DEFAULT_AUTO_TOL;
use crate::spectrum::DEFAULT_GRID_POINTS;

pub const DEFAULT_MASTER_SEED: u64 = 20_190_612;
pub const CI_ENSEMBLE_SIZE: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    pub epsilon0: f64,
    pub target_fidelity: f64,
    pub sigma_list: Vec<f64>,
    pub ensemble_size: usize,
    pub master_seed: u64,
    /// Unset means one worker; overridden by the environment and `--workers`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub ideal: IdealSection,
    pub grid: GridSection,
    pub calibration: CalibrationSection,
    pub conditions: ConditionsSection,
    /// One ensemble family per entry, each swept over `sigma_list`.
    pub disorder: Vec<DisorderEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdealSection {
    pub lambda: f64,
    pub h: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Eigenvector trace points (gap traces and conditions).
    pub trace_points: usize,
    /// Values-only scan points for ensemble Δ_min.
    pub ensemble_points: usize,
    /// Tracked levels; unset means `min(2^N, 6)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    pub hist_bins: usize,
    /// Sampling points of the eigenbasis population trace.
    pub population_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub resolution: f64,
    pub tf_cap: f64,
    pub growth: f64,
    pub propagation_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsSection {
    pub enabled: bool,
    pub n: usize,
    pub targets: Vec<ParamKind>,
    pub sigma: f64,
    pub pair_set: PairSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderEntry {
    pub targets: Vec<ParamKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_list: vec![2, 3, 4, 5, 6, 8],
            epsilon0: DEFAULT_EPSILON0,
            target_fidelity: DEFAULT_TARGET,
            sigma_list: vec![0.0, 0.02, 0.04, 0.06, 0.08, 0.1],
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
            master_seed: DEFAULT_MASTER_SEED,
            workers: None,
            output_dir: None,
            ideal: IdealSection::default(),
            grid: GridSection::default(),
            calibration: CalibrationSection::default(),
            conditions: ConditionsSection::default(),
            disorder: [ParamKind::H, ParamKind::J, ParamKind::Lambda]
                .into_iter()
                .map(|k| DisorderEntry { targets: vec![k] })
                .collect(),
        }
    }
}

impl Default for IdealSection {
    fn default() -> Self {
        Self { lambda: IDEAL_LAMBDA, h: IDEAL_H, j: IDEAL_J }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            trace_points: DEFAULT_GRID_POINTS,
            ensemble_points: DEFAULT_SCAN_POINTS,
            levels: None,
            hist_bins: DEFAULT_HIST_BINS,
            population_samples: 101,
        }
    }
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            tf_cap: DEFAULT_TF_CAP,
            growth: DEFAULT_GROWTH,
            propagation_tol: DEFAULT_AUTO_TOL,
        }
    }
}

impl Default for ConditionsSection {
    fn default() -> Self {
        Self { enabled: true, n: 5, targets: vec![ParamKind::Lambda], sigma: 0.1, pair_set: PairSet::Ground }
    }
}

/// Preset ensemble sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Paper,
    Ci,
}

impl Profile {
    pub fn apply(self, cfg: &mut ExperimentConfig) {
        cfg.ensemble_size = match self {
            Profile::Paper => DEFAULT_ENSEMBLE_SIZE,
            Profile::Ci => CI_ENSEMBLE_SIZE,
        };
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn check_sigma(key: &str, s: f64) -> Result<()> {
    if !s.is_finite() || !(0.0..=MAX_SIGMA_REL).contains(&s) {
        return Err(invalid(key, format!("{s} outside [0, {MAX_SIGMA_REL}]")));
    }
    Ok(())
}

fn check_n(key: &str, n: usize) -> Result<()> {
    if !(2..=DEFAULT_MAX_QUBITS).contains(&n) {
        return Err(invalid(key, format!("chain size {n} outside [2, {DEFAULT_MAX_QUBITS}]")));
    }
    Ok(())
}

fn check_positive(key: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(invalid(key, format!("{x} must be positive and finite")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Echo written next to the outputs. Worker count and output directory
    /// are left out so the artifact tree does not depend on them.
    pub fn resolved_echo(&self) -> Result<String> {
        let echo = Self { workers: None, output_dir: None, ..self.clone() };
        echo.to_toml_string()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for &n in &self.n_list {
            check_n("n_list", n)?;
            if !seen.insert(n) {
                return Err(invalid("n_list", format!("duplicate entry {n}")));
            }
        }
        check_positive("epsilon0", self.epsilon0)?;
        if !(self.target_fidelity > 0.0 && self.target_fidelity < 1.0) {
            return Err(invalid("target_fidelity", format!("{} outside (0, 1)", self.target_fidelity)));
        }
        for &s in &self.sigma_list {
            check_sigma("sigma_list", s)?;
        }
        if self.ensemble_size == 0 {
            return Err(invalid("ensemble_size", "must be positive"));
        }
        // TOML integers are signed 64-bit
        if self.master_seed > i64::MAX as u64 {
            return Err(invalid("master_seed", format!("must not exceed {}", i64::MAX)));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be positive"));
        }
        check_positive("ideal.lambda", self.ideal.lambda)?;
        for (key, v) in [("ideal.h", self.ideal.h), ("ideal.j", self.ideal.j)] {
            if !v.is_finite() {
                return Err(invalid(key, format!("{v} is not finite")));
            }
        }
        if self.grid.trace_points < 11 {
            return Err(invalid("grid.trace_points", "must be at least 11"));
        }
        if self.grid.ensemble_points < 11 {
            return Err(invalid("grid.ensemble_points", "must be at least 11"));
        }
        if let Some(k) = self.grid.levels {
            if k < 2 {
                return Err(invalid("grid.levels", "must be at least 2"));
            }
        }
        if self.grid.hist_bins == 0 {
            return Err(invalid("grid.hist_bins", "must be positive"));
        }
        if self.grid.population_samples < 2 {
            return Err(invalid("grid.population_samples", "must be at least 2"));
        }
        check_positive("calibration.resolution", self.calibration.resolution)?;
        check_positive("calibration.tf_cap", self.calibration.tf_cap)?;
        check_positive("calibration.propagation_tol", self.calibration.propagation_tol)?;
        if !(self.calibration.growth > 1.0 && self.calibration.growth.is_finite()) {
            return Err(invalid("calibration.growth", "must exceed 1"));
        }
        check_n("conditions.n", self.conditions.n)?;
        check_sigma("conditions.sigma", self.conditions.sigma)?;
        if self.conditions.targets.is_empty() {
            return Err(invalid("conditions.targets", "must not be empty"));
        }
        for (i, d) in self.disorder.iter().enumerate() {
            if d.targets.is_empty() {
                return Err(invalid(&format!("disorder[{i}].targets"), "must not be empty"));
            }
        }
        Ok(())
    }

    pub fn calibration_options(&self) -> CalibrationOptions {
        CalibrationOptions {
            epsilon0: self.epsilon0,
            ideal_lambda: self.ideal.lambda,
            ideal_h: self.ideal.h,
            ideal_j: self.ideal.j,
            target: self.target_fidelity,
            tf_cap: self.calibration.tf_cap,
            growth: self.calibration.growth,
            resolution: self.calibration.resolution,
            propagation_tol: self.calibration.propagation_tol,
            grid_points: self.grid.trace_points,
        }
    }

    pub fn levels_for(&self, n: usize) -> usize {
        let dim = 1usize << n;
        self.grid.levels.map_or(crate::spectrum::default_levels(n), |k| k.min(dim))
    }
}
