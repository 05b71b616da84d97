//! Grid-based evaluation: sampled spectra, centroids, extinction and peak
//! location, and the time-domain density via a discrete Fourier transform.

pub mod quadrature;
mod transform;

pub use transform::{
    analytic_time_density, analytic_time_integral, relative_l2_error, time_domain_density, TemporalDensitySamples,
    ALIASING_TOLERANCE,
};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::quantum::{spectral_density, CouplingDelay, MeterSpec, SelectionSpec};
use quadrature::{trapezoid, trapezoid_weighted};

/// Minimum half-span, in units of delta, below which sampling records a warning.
pub const MIN_SPAN_SIGMAS: f64 = 6.0;

/// Relative height below which a lobe is not reported as a peak.
const LOBE_FLOOR: f64 = 1e-9;

/// Uniform grid over `[omega_min, omega_max]` with `n` points, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n: usize,
}

impl FrequencyGrid {
    pub fn new(omega_min: f64, omega_max: f64, n: usize) -> Result<Self> {
        if !(omega_min.is_finite() && omega_max.is_finite() && omega_max > omega_min) {
            return Err(Error::invalid("grid", "omega_max must exceed omega_min"));
        }
        if n < 2 {
            return Err(Error::invalid("grid.n_points", "must be >= 2"));
        }
        Ok(Self {
            omega_min,
            omega_max,
            n,
        })
    }

    pub fn centered(center: f64, half_width: f64, n: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, n)
    }

    pub fn step(&self) -> f64 {
        (self.omega_max - self.omega_min) / (self.n - 1) as f64
    }

    /// Grid point `i`, computed from the midpoint so mirrored points stay mirrored.
    pub fn point(&self, i: usize) -> f64 {
        let mid = 0.5 * (self.omega_min + self.omega_max);
        mid + (i as f64 - 0.5 * (self.n - 1) as f64) * self.step()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.point(i))
    }
}

/// Spectral density sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensitySamples {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub meter: MeterSpec,
    pub warnings: Vec<String>,
}

impl SpectralDensitySamples {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step())
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.grid.points().collect()
    }
}

/// Samples the postselected spectrum on the config's default grid.
pub fn sample_spectrum(config: &ExperimentConfig) -> Result<SpectralDensitySamples> {
    config.validate()?;
    let m = config.meter;
    let g = config.spectral_grid;
    let grid = FrequencyGrid::centered(m.omega0(), g.span_sigmas * m.delta(), g.n_points)?;
    sample_spectrum_on(config.meter, config.selection, config.tau, grid)
}

pub fn sample_spectrum_on(
    meter: MeterSpec,
    sel: SelectionSpec,
    tau: CouplingDelay,
    grid: FrequencyGrid,
) -> Result<SpectralDensitySamples> {
    let values = grid.points().map(|w| spectral_density(meter, sel, tau, w)).collect();
    let mut warnings = Vec::new();
    let lo = (meter.omega0() - grid.omega_min) / meter.delta();
    let hi = (grid.omega_max - meter.omega0()) / meter.delta();
    if lo.min(hi) < MIN_SPAN_SIGMAS {
        warnings.push(format!(
            "grid covers only omega0 -{lo:.2} / +{hi:.2} delta; at least +-{MIN_SPAN_SIGMAS} recommended"
        ));
    }
    Ok(SpectralDensitySamples {
        grid,
        values,
        meter,
        warnings,
    })
}

/// Trapezoid centroid of the samples minus omega0.
pub fn centroid_shift(samples: &SpectralDensitySamples) -> Result<f64> {
    let step = samples.grid.step();
    let mass = trapezoid(&samples.values, step);
    if !(mass > 0.0) {
        return Err(Error::UndefinedCentroid);
    }
    // First moment about omega0 directly, avoiding cancellation against omega0.
    let start = samples.grid.point(0) - samples.meter.omega0();
    let moment = trapezoid_weighted(&samples.values, start, step, |x| x);
    Ok(moment / mass)
}

/// The k = 0 root `epsilon / tau` of `sin(omega tau - epsilon)`.
pub fn extinction_frequency(sel: SelectionSpec, tau: CouplingDelay) -> Result<f64> {
    if tau.ps() == 0.0 {
        return Err(Error::NoExtinction);
    }
    Ok(sel.epsilon() / tau.ps())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub value: f64,
}

/// Lobe maxima on either side of the extinction point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakPositions {
    Split {
        low: Peak,
        high: Peak,
    },
    /// Only one lobe carries weight (no extinction in band, or tau = 0).
    Single(Peak),
}

impl PeakPositions {
    pub fn is_single(&self) -> bool {
        matches!(self, PeakPositions::Single(_))
    }

    /// `(low, high)`; a single peak is reported on both sides.
    pub fn omegas(&self) -> (f64, f64) {
        match self {
            PeakPositions::Split { low, high } => (low.omega, high.omega),
            PeakPositions::Single(p) => (p.omega, p.omega),
        }
    }
}

pub fn peak_positions(samples: &SpectralDensitySamples, extinction: Option<f64>) -> Result<PeakPositions> {
    let values = &samples.values;
    let global = values.iter().copied().fold(0.0, f64::max);
    if !(global > 0.0) {
        return Err(Error::UndefinedCentroid);
    }
    let n = values.len();
    let split = match extinction {
        Some(w) => {
            // first index strictly above the extinction frequency
            let k = samples.grid.points().position(|x| x > w).unwrap_or(n);
            k
        }
        None => n,
    };
    let low = lobe_peak(samples, 0, split, global);
    let high = lobe_peak(samples, split, n, global);
    match (low, high) {
        (Some(low), Some(high)) => Ok(PeakPositions::Split { low, high }),
        (Some(p), None) | (None, Some(p)) => Ok(PeakPositions::Single(p)),
        (None, None) => {
            let (i, _) = argmax(values, 0, n);
            Ok(PeakPositions::Single(refine(samples, i)))
        }
    }
}

fn argmax(values: &[f64], from: usize, to: usize) -> (usize, f64) {
    let mut best = (from, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate().take(to).skip(from) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn lobe_peak(samples: &SpectralDensitySamples, from: usize, to: usize, global: f64) -> Option<Peak> {
    if to <= from {
        return None;
    }
    let (i, v) = argmax(&samples.values, from, to);
    let interior = i > 0 && i + 1 < samples.values.len();
    if v < LOBE_FLOOR * global || !interior || i == from || i + 1 == to {
        return None;
    }
    Some(refine(samples, i))
}

/// Three-point parabolic refinement on log-density.
fn refine(samples: &SpectralDensitySamples, i: usize) -> Peak {
    let v = &samples.values;
    let raw = Peak {
        omega: samples.grid.point(i),
        value: v[i],
    };
    if i == 0 || i + 1 >= v.len() || v[i - 1] <= 0.0 || v[i] <= 0.0 || v[i + 1] <= 0.0 {
        return raw;
    }
    let (y0, y1, y2) = (v[i - 1].ln(), v[i].ln(), v[i + 1].ln());
    let denom = y0 - 2.0 * y1 + y2;
    if !(denom < 0.0) {
        return raw;
    }
    let p = 0.5 * (y0 - y2) / denom;
    Peak {
        omega: raw.omega + p * samples.grid.step(),
        value: (y1 - 0.25 * (y0 - y2) * p).exp(),
    }
}
