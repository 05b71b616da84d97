use crate::error::{Error, Result};
use crate::quantum::{CouplingDelay, MeterSpec, SelectionSpec};

/// Uniform frequency grid centered on the meter, `omega0 +- span_sigmas * delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGridSpec {
    pub span_sigmas: f64,
    pub n_points: usize,
}

impl Default for SpectralGridSpec {
    fn default() -> Self {
        Self {
            span_sigmas: 8.0,
            n_points: 1 << 14,
        }
    }
}

/// Uniform time grid `+- window_factor / delta` for the transform path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGridSpec {
    pub window_factor: f64,
    pub n_points: usize,
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        Self {
            window_factor: 20.0,
            n_points: 1 << 14,
        }
    }
}

/// Physical parameters plus numerical grids for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub meter: MeterSpec,
    pub selection: SelectionSpec,
    pub tau: CouplingDelay,
    pub spectral_grid: SpectralGridSpec,
    pub time_grid: TimeGridSpec,
}

impl ExperimentConfig {
    pub fn new(meter: MeterSpec, selection: SelectionSpec, tau: CouplingDelay) -> Self {
        Self {
            meter,
            selection,
            tau,
            spectral_grid: SpectralGridSpec::default(),
            time_grid: TimeGridSpec::default(),
        }
    }

    pub fn with_tau(mut self, tau: CouplingDelay) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_selection(mut self, selection: SelectionSpec) -> Self {
        self.selection = selection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.spectral_grid;
        if !(g.span_sigmas.is_finite() && g.span_sigmas > 0.0) {
            return Err(Error::invalid("grid.omega_span_sigmas", "must be > 0"));
        }
        if g.n_points < 2 {
            return Err(Error::invalid("grid.n_points", "must be >= 2"));
        }
        let t = self.time_grid;
        if !(t.window_factor.is_finite() && t.window_factor > 0.0) {
            return Err(Error::invalid("time.window_factor", "must be > 0"));
        }
        if t.n_points < 2 || !t.n_points.is_power_of_two() {
            return Err(Error::invalid("time.n_points", "must be a power of two >= 2"));
        }
        Ok(())
    }
}
