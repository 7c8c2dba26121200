//! TOML run configuration.
//!
//! Every section and field is optional; missing values take the 3GPP Case 1
//! defaults. Unknown keys are rejected so that typos do not silently fall
//! back to a default.

use std::path::Path;

use downtilt_core::analytic::{ScenarioParams, System};
use downtilt_core::channel::{AntennaConfig, GainModel, PropagationParams};
use downtilt_core::mcsim::Association;
use downtilt_core::quadrature::QuadratureSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub propagation: PropagationParams,
    pub antenna: AntennaConfig,
    pub scenario: ScenarioParams,
    pub quadrature: QuadratureSpec,
    pub gain_model: GainModel,
    pub sweep: SweepConfig,
    pub mc: McConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            propagation: PropagationParams::default(),
            antenna: AntennaConfig::default(),
            scenario: ScenarioParams::default(),
            quadrature: QuadratureSpec::default(),
            gain_model: GainModel::Exact,
            sweep: SweepConfig::default(),
            mc: McConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Densities (per km²) of the density sweeps.
    pub density_grid: Vec<f64>,
    /// Densities (per km²) of each curve in `coverage-tilt`.
    pub densities: Vec<f64>,
    /// Tilts (degrees) of `coverage-tilt` and `signal-gain`.
    pub tilt_grid: Vec<f64>,
    /// Coarse grid step (degrees) of the optimal-tilt scan.
    pub scan_step: f64,
    /// Grid step (degrees) used to bracket stationarity roots.
    pub bracket_step: f64,
    /// Multiplier `z` of the vertical beamwidth in the empirical tilt.
    pub empirical_z: f64,
    /// Vertical beamwidth (degrees) in the empirical tilt.
    pub empirical_bv: f64,
}

/// `per_decade` log-uniform points per decade over `[10^lo, 10^hi]`.
pub fn log_grid(lo: i32, hi: i32, per_decade: usize) -> Vec<f64> {
    let n = (hi - lo) as usize * per_decade;
    (0..=n)
        .map(|i| 10f64.powf(lo as f64 + i as f64 / per_decade as f64))
        .collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            density_grid: log_grid(0, 6, 7),
            densities: vec![10.0, 100.0, 1000.0, 1e4, 1e5],
            tilt_grid: (0..=90).map(f64::from).collect(),
            scan_step: 1.0,
            bracket_step: 2.0,
            empirical_z: downtilt_core::optimizer::EMPIRICAL_Z,
            empirical_bv: downtilt_core::optimizer::EMPIRICAL_BV,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub enabled: bool,
    pub trials: u64,
    pub seed: u64,
    /// Fixed disc radius (m); by default the smallest radius passing the tail check.
    pub sim_radius: Option<f64>,
    pub association: Association,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            trials: 100_000,
            seed: 1,
            sim_radius: None,
            association: Association::PathLoss,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn system(&self) -> System {
        System {
            propagation: self.propagation,
            antenna: self.antenna,
            gain_model: self.gain_model,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let core = |section: &str, e: downtilt_core::Error| match e {
            downtilt_core::Error::InvalidParam { name, reason } => invalid(format!("{section}.{name}"), reason),
            other => invalid(section, other.to_string()),
        };
        self.propagation.validate().map_err(|e| core("propagation", e))?;
        self.antenna.validate().map_err(|e| core("antenna", e))?;
        self.scenario.validate().map_err(|e| core("scenario", e))?;
        self.quadrature
            .validate(self.propagation.d1)
            .map_err(|e| core("quadrature", e))?;
        check_grid("sweep.density_grid", &self.sweep.density_grid, |x| x > 0.0)?;
        check_grid("sweep.densities", &self.sweep.densities, |x| x > 0.0)?;
        check_grid("sweep.tilt_grid", &self.sweep.tilt_grid, |x| (0.0..=90.0).contains(&x))?;
        for (key, step) in [("sweep.scan_step", self.sweep.scan_step), ("sweep.bracket_step", self.sweep.bracket_step)] {
            if !(step > 0.0 && step <= 90.0) {
                return Err(invalid(key, format!("must lie in (0, 90], got {step}")));
            }
        }
        if self.mc.trials == 0 {
            return Err(invalid("mc.trials", "must be positive"));
        }
        if let Some(r) = self.mc.sim_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid("mc.sim_radius", format!("must be positive and finite, got {r}")));
            }
        }
        Ok(())
    }
}

fn check_grid(key: &str, grid: &[f64], admissible: impl Fn(f64) -> bool) -> Result<(), ConfigError> {
    if grid.is_empty() {
        return Err(invalid(key, "grid is empty"));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite() || !admissible(**x)) {
        return Err(invalid(key, format!("value {x} out of range")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(key, "must be strictly increasing"));
    }
    Ok(())
}
