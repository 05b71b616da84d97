//! Flat `dotted.key = value` run configuration.

use std::fmt::Write as _;

use crate::config::{ExperimentConfig, SpectralGridSpec, TimeGridSpec};
use crate::instrument::{MonteCarloSettings, OsaSpec};
use crate::quantum::{CouplingDelay, MeterSpec, SelectionSpec};

use super::CliError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CDIWM_CONFIG";

/// Every accepted key with a one-line description, in echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("omega0_thz", "meter center angular frequency [rad/ps]"),
    ("delta_thz", "meter 1/e amplitude half-width [rad/ps]"),
    ("epsilon_rad", "postselection angle [rad]"),
    ("tau_as", "coupling delay [as]"),
    ("grid.omega_span_sigmas", "spectral grid half-span in units of delta"),
    ("grid.n_points", "spectral grid points"),
    ("time.window_factor", "time window half-width in units of 1/delta"),
    ("time.n_points", "time grid points (power of two)"),
    ("osa.center_nm", "spectrometer center wavelength [nm]"),
    ("osa.resolution_nm", "spectrometer resolution [nm]"),
    ("osa.span_nm", "spectrometer span [nm]"),
    ("osa.n_bins", "spectrometer bins"),
    ("photons", "photons per Monte-Carlo trial"),
    ("trials", "Monte-Carlo trials per ladder rung"),
    ("seed", "master seed"),
    (
        "source_referenced",
        "scale photons by the postselection probability (true/false)",
    ),
];

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub omega_span_sigmas: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub window_factor: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsaConfig {
    pub center_nm: f64,
    pub resolution_nm: f64,
    pub span_nm: f64,
    pub n_bins: usize,
}

/// User-facing configuration in boundary units (rad/ps, as, nm).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega0_thz: f64,
    pub delta_thz: f64,
    pub epsilon_rad: f64,
    pub tau_as: f64,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub osa: OsaConfig,
    pub photons: u64,
    pub trials: usize,
    pub seed: u64,
    pub source_referenced: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = SpectralGridSpec::default();
        let time = TimeGridSpec::default();
        let osa = OsaSpec::default();
        Self {
            omega0_thz: 2350.0,
            delta_thz: 200.0,
            epsilon_rad: 0.02,
            tau_as: 8.5,
            grid: GridConfig {
                omega_span_sigmas: grid.span_sigmas,
                n_points: grid.n_points,
            },
            time: TimeConfig {
                window_factor: time.window_factor,
                n_points: time.n_points,
            },
            osa: OsaConfig {
                center_nm: osa.center_wavelength,
                resolution_nm: osa.resolution_wavelength,
                span_nm: osa.span_wavelength,
                n_bins: osa.n_bins,
            },
            photons: 1_000_000,
            trials: 200,
            seed: 1,
            source_referenced: false,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Config(format!("`{key}`: expected a finite number, got `{value}`")))
}

fn parse_uint<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse::<T>()
        .map_err(|_| CliError::Config(format!("`{key}`: expected a non-negative integer, got `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::Config(format!(
            "`{key}`: expected true or false, got `{value}`"
        ))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "omega0_thz" => self.omega0_thz = parse_f64(key, value)?,
            "delta_thz" => self.delta_thz = parse_f64(key, value)?,
            "epsilon_rad" => self.epsilon_rad = parse_f64(key, value)?,
            "tau_as" => self.tau_as = parse_f64(key, value)?,
            "grid.omega_span_sigmas" => self.grid.omega_span_sigmas = parse_f64(key, value)?,
            "grid.n_points" => self.grid.n_points = parse_uint(key, value)?,
            "time.window_factor" => self.time.window_factor = parse_f64(key, value)?,
            "time.n_points" => self.time.n_points = parse_uint(key, value)?,
            "osa.center_nm" => self.osa.center_nm = parse_f64(key, value)?,
            "osa.resolution_nm" => self.osa.resolution_nm = parse_f64(key, value)?,
            "osa.span_nm" => self.osa.span_nm = parse_f64(key, value)?,
            "osa.n_bins" => self.osa.n_bins = parse_uint(key, value)?,
            "photons" => self.photons = parse_uint(key, value)?,
            "trials" => self.trials = parse_uint(key, value)?,
            "seed" => self.seed = parse_uint(key, value)?,
            "source_referenced" => self.source_referenced = parse_bool(key, value)?,
            _ => return Err(CliError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            self.set(key, value)
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "omega0_thz" => self.omega0_thz.to_string(),
            "delta_thz" => self.delta_thz.to_string(),
            "epsilon_rad" => self.epsilon_rad.to_string(),
            "tau_as" => self.tau_as.to_string(),
            "grid.omega_span_sigmas" => self.grid.omega_span_sigmas.to_string(),
            "grid.n_points" => self.grid.n_points.to_string(),
            "time.window_factor" => self.time.window_factor.to_string(),
            "time.n_points" => self.time.n_points.to_string(),
            "osa.center_nm" => self.osa.center_nm.to_string(),
            "osa.resolution_nm" => self.osa.resolution_nm.to_string(),
            "osa.span_nm" => self.osa.span_nm.to_string(),
            "osa.n_bins" => self.osa.n_bins.to_string(),
            "photons" => self.photons.to_string(),
            "trials" => self.trials.to_string(),
            "seed" => self.seed.to_string(),
            "source_referenced" => self.source_referenced.to_string(),
            _ => return None,
        })
    }

    /// Canonical text form; parses back to an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    pub fn meter(&self) -> Result<MeterSpec, CliError> {
        Ok(MeterSpec::new(self.omega0_thz, self.delta_thz)?)
    }

    pub fn selection(&self) -> Result<SelectionSpec, CliError> {
        Ok(SelectionSpec::new(self.epsilon_rad)?)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let mut exp = ExperimentConfig::new(
            self.meter()?,
            self.selection()?,
            CouplingDelay::from_attoseconds(self.tau_as)?,
        );
        exp.spectral_grid = SpectralGridSpec {
            span_sigmas: self.grid.omega_span_sigmas,
            n_points: self.grid.n_points,
        };
        exp.time_grid = TimeGridSpec {
            window_factor: self.time.window_factor,
            n_points: self.time.n_points,
        };
        exp.validate()?;
        Ok(exp)
    }

    pub fn osa(&self) -> Result<OsaSpec, CliError> {
        Ok(OsaSpec::new(
            self.osa.center_nm,
            self.osa.resolution_nm,
            self.osa.span_nm,
            self.osa.n_bins,
        )?)
    }

    pub fn monte_carlo(&self) -> MonteCarloSettings {
        MonteCarloSettings {
            photons: self.photons,
            trials: self.trials,
            seed: self.seed,
            source_referenced: self.source_referenced,
        }
    }

    /// Checks every derived spec without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        self.experiment()?;
        self.osa()?;
        Ok(())
    }
}
