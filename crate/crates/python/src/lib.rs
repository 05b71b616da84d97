//! Python bindings. Delays cross the boundary in attoseconds, frequencies in
//! rad/ps and wavelengths in nm.

// pyo3 0.22 method wrappers trip this lint on every `PyResult` return.
#![allow(clippy::useless_conversion)]

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cdiwm::analytics::{self, SchemeKind};
use cdiwm::instrument::{self, CountRecord, EstimateMethod, MonteCarloSettings, OsaSpec};
use cdiwm::numerics;
use cdiwm::quantum::{self, CouplingDelay, MeterSpec, SelectionSpec, PS_PER_AS};
use cdiwm::{ExperimentConfig, SpectralGridSpec, TimeGridSpec};

fn py_err(e: cdiwm::Error) -> PyErr {
    match e {
        cdiwm::Error::InvalidParameter { .. } | cdiwm::Error::SpanMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        cdiwm::Error::NoEstimate(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyArithmeticError::new_err(e.to_string()),
    }
}

fn scheme(name: &str) -> PyResult<SchemeKind> {
    match name.to_ascii_lowercase().as_str() {
        "swm" => Ok(SchemeKind::Swm),
        "cdiwm" => Ok(SchemeKind::Cdiwm),
        _ => Err(PyValueError::new_err(format!("unknown scheme `{name}` (swm or cdiwm)"))),
    }
}

fn delay(tau_as: f64) -> PyResult<CouplingDelay> {
    CouplingDelay::from_attoseconds(tau_as).map_err(py_err)
}

/// Spectrometer model: Gaussian kernel with FWHM equal to the resolution,
/// integrated over uniform bins.
#[pyclass(name = "Osa", module = "cdiwm")]
#[derive(Clone)]
struct PyOsa {
    inner: OsaSpec,
}

#[pymethods]
impl PyOsa {
    #[new]
    #[pyo3(signature = (center_nm=800.0, resolution_nm=0.01, span_nm=700.0, n_bins=2048))]
    fn new(center_nm: f64, resolution_nm: f64, span_nm: f64, n_bins: usize) -> PyResult<Self> {
        Ok(Self {
            inner: OsaSpec::new(center_nm, resolution_nm, span_nm, n_bins).map_err(py_err)?,
        })
    }

    /// Resolution as an angular frequency, rad/ps.
    #[getter]
    fn resolution_radps(&self) -> f64 {
        self.inner.resolution().radps()
    }

    #[getter]
    fn n_bins(&self) -> usize {
        self.inner.n_bins
    }

    fn bin_edges(&self) -> Vec<f64> {
        self.inner.bin_edges()
    }

    fn __repr__(&self) -> String {
        format!(
            "Osa(center_nm={}, resolution_nm={}, span_nm={}, n_bins={})",
            self.inner.center_wavelength,
            self.inner.resolution_wavelength,
            self.inner.span_wavelength,
            self.inner.n_bins
        )
    }
}

/// Meter, postselection angle, delay and sampling grids.
#[pyclass(name = "Experiment", module = "cdiwm")]
#[derive(Clone)]
struct PyExperiment {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (
        omega0=2350.0, delta=200.0, epsilon=0.02, tau_as=8.5,
        span_sigmas=8.0, n_points=16384, window_factor=20.0, time_points=16384
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        omega0: f64,
        delta: f64,
        epsilon: f64,
        tau_as: f64,
        span_sigmas: f64,
        n_points: usize,
        window_factor: f64,
        time_points: usize,
    ) -> PyResult<Self> {
        let mut inner = ExperimentConfig::new(
            MeterSpec::new(omega0, delta).map_err(py_err)?,
            SelectionSpec::new(epsilon).map_err(py_err)?,
            delay(tau_as)?,
        );
        inner.spectral_grid = SpectralGridSpec { span_sigmas, n_points };
        inner.time_grid = TimeGridSpec {
            window_factor,
            n_points: time_points,
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.meter.omega0()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.meter.delta()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.selection.epsilon()
    }

    #[getter]
    fn tau_as(&self) -> f64 {
        self.inner.tau.attoseconds()
    }

    /// Copy with a different delay.
    fn with_tau(&self, tau_as: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_tau(delay(tau_as)?),
        })
    }

    /// Copy with a different postselection angle.
    fn with_epsilon(&self, epsilon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_selection(SelectionSpec::new(epsilon).map_err(py_err)?),
        })
    }

    fn probability(&self) -> f64 {
        quantum::postselection_probability(self.inner.meter, self.inner.selection, self.inner.tau)
    }

    /// Closed-form centroid shift, rad/ps.
    fn mean_shift(&self) -> PyResult<f64> {
        analytics::mean_spectral_shift(self.inner.meter, self.inner.selection, self.inner.tau).map_err(py_err)
    }

    /// d(mean shift)/d(tau), rad/ps per as.
    fn shift_rate(&self) -> PyResult<f64> {
        analytics::shift_rate(self.inner.meter, self.inner.selection, self.inner.tau)
            .map(|r| r * PS_PER_AS)
            .map_err(py_err)
    }

    fn working_point_as(&self) -> f64 {
        analytics::cdi_working_point(self.inner.meter, self.inner.selection).attoseconds()
    }

    /// `(omega, S)` on the configured grid.
    fn spectrum(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let s = numerics::sample_spectrum(&self.inner).map_err(py_err)?;
        Ok((s.omegas(), s.values))
    }

    /// Trapezoid centroid of the sampled spectrum minus omega0, rad/ps.
    fn centroid_shift(&self) -> PyResult<f64> {
        let s = numerics::sample_spectrum(&self.inner).map_err(py_err)?;
        numerics::centroid_shift(&s).map_err(py_err)
    }

    /// `(low, high, single)` lobe maxima in rad/ps.
    fn peaks(&self) -> PyResult<(f64, f64, bool)> {
        let s = numerics::sample_spectrum(&self.inner).map_err(py_err)?;
        let ext = numerics::extinction_frequency(self.inner.selection, self.inner.tau).ok();
        let p = numerics::peak_positions(&s, ext).map_err(py_err)?;
        let (lo, hi) = p.omegas();
        Ok((lo, hi, p.is_single()))
    }

    /// `(t_as, T)` from the FFT path.
    fn time_density(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let t = numerics::time_domain_density(&self.inner).map_err(py_err)?;
        Ok((t.times().into_iter().map(|x| x / PS_PER_AS).collect(), t.values))
    }

    /// Binned spectrometer intensities.
    fn binned(&self, osa: &PyOsa) -> PyResult<Vec<f64>> {
        let s = numerics::sample_spectrum(&self.inner).map_err(py_err)?;
        Ok(instrument::bin_spectrum(&s, &osa.inner).map_err(py_err)?.intensities)
    }

    /// Multinomial photon counts per bin.
    fn sample_counts(&self, osa: &PyOsa, photons: u64, seed: u64) -> PyResult<Vec<u64>> {
        let s = numerics::sample_spectrum(&self.inner).map_err(py_err)?;
        let b = instrument::bin_spectrum(&s, &osa.inner).map_err(py_err)?;
        Ok(instrument::sample_counts(&b, photons, seed).map_err(py_err)?.counts)
    }

    /// Delay estimate `(tau_as, stderr_as)` from counts, searching `window_as`.
    #[pyo3(signature = (osa, counts, window_as, method="likelihood"))]
    fn estimate_tau(&self, osa: &PyOsa, counts: Vec<u64>, window_as: (f64, f64), method: &str) -> PyResult<(f64, f64)> {
        let method = match method {
            "likelihood" => EstimateMethod::GridLikelihood,
            "centroid" => EstimateMethod::CentroidInversion,
            _ => return Err(PyValueError::new_err("method must be `likelihood` or `centroid`")),
        };
        if counts.len() != osa.inner.n_bins {
            return Err(PyValueError::new_err(format!(
                "expected {} counts, got {}",
                osa.inner.n_bins,
                counts.len()
            )));
        }
        let record = CountRecord {
            bin_edges: osa.inner.bin_edges(),
            total_photons: counts.iter().sum(),
            counts,
            seed: 0,
        };
        let window = (window_as.0 * PS_PER_AS, window_as.1 * PS_PER_AS);
        let r = instrument::estimate_tau(&record, &self.inner, &osa.inner, window, method).map_err(py_err)?;
        Ok((r.tau_hat / PS_PER_AS, r.stderr / PS_PER_AS))
    }

    fn __repr__(&self) -> String {
        format!(
            "Experiment(omega0={}, delta={}, epsilon={}, tau_as={})",
            self.omega0(),
            self.delta(),
            self.epsilon(),
            self.tau_as()
        )
    }
}

/// Postselection probability at delay `tau_as`.
#[pyfunction]
#[pyo3(signature = (epsilon, tau_as, omega0=2350.0, delta=200.0))]
fn postselection_probability(epsilon: f64, tau_as: f64, omega0: f64, delta: f64) -> PyResult<f64> {
    let m = MeterSpec::new(omega0, delta).map_err(py_err)?;
    let s = SelectionSpec::new(epsilon).map_err(py_err)?;
    Ok(quantum::postselection_probability(m, s, delay(tau_as)?))
}

/// Weak value of the polarization observable, `i cot(epsilon)`.
#[pyfunction]
fn weak_value(epsilon: f64) -> PyResult<Complex64> {
    quantum::weak_value(SelectionSpec::new(epsilon).map_err(py_err)?).map_err(py_err)
}

/// Closed-form resolution limit in as for `scheme` (`swm` or `cdiwm`).
#[pyfunction]
#[pyo3(signature = (scheme_name, epsilon, omega0=2350.0, delta=200.0, resolution_nm=0.01, center_nm=800.0))]
fn resolution_limit(
    scheme_name: &str,
    epsilon: f64,
    omega0: f64,
    delta: f64,
    resolution_nm: f64,
    center_nm: f64,
) -> PyResult<f64> {
    let m = MeterSpec::new(omega0, delta).map_err(py_err)?;
    let s = SelectionSpec::new(epsilon).map_err(py_err)?;
    let w = instrument::wavelength_interval_to_angular(resolution_nm, center_nm).map_err(py_err)?;
    let res = analytics::OsaResolution::new(w).map_err(py_err)?;
    Ok(analytics::resolution_limit(scheme(scheme_name)?, m, s, res) / PS_PER_AS)
}

/// Deterministic and Monte-Carlo detection thresholds; delays in as.
#[pyfunction]
#[pyo3(signature = (scheme_name, experiment, osa, photons=1_000_000, trials=200, seed=1, source_referenced=false))]
#[allow(clippy::too_many_arguments)]
fn resolution_experiment<'py>(
    py: Python<'py>,
    scheme_name: &str,
    experiment: &PyExperiment,
    osa: &PyOsa,
    photons: u64,
    trials: usize,
    seed: u64,
    source_referenced: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mc = MonteCarloSettings {
        photons,
        trials,
        seed,
        source_referenced,
    };
    let kind = scheme(scheme_name)?;
    let r = py
        .allow_threads(|| instrument::resolution_experiment(kind, &experiment.inner, &osa.inner, &mc))
        .map_err(py_err)?;
    let d = PyDict::new_bound(py);
    d.set_item("scheme", r.scheme.to_string())?;
    d.set_item("reference_tau_as", r.reference_tau / PS_PER_AS)?;
    d.set_item("analytic_limit_as", r.analytic_limit / PS_PER_AS)?;
    d.set_item("deterministic_threshold_as", r.deterministic_threshold / PS_PER_AS)?;
    d.set_item("resolution_radps", r.resolution)?;
    d.set_item(
        "dtau_as",
        r.ladder.iter().map(|p| p.dtau / PS_PER_AS).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "displacement",
        r.ladder.iter().map(|p| p.displacement).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "detection_fraction",
        r.ladder.iter().map(|p| p.detection_fraction).collect::<Vec<_>>(),
    )?;
    if let Some(m) = r.monte_carlo {
        d.set_item("null_threshold_radps", m.null_threshold)?;
        d.set_item("false_detection_rate", m.false_detection_rate)?;
        d.set_item("smallest_detected_as", m.smallest_detected.map(|t| t / PS_PER_AS))?;
    }
    Ok(d)
}

/// Runs the command-line front end in-process and returns its stdout.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> PyResult<String> {
    let mut argv = vec!["cdiwm".to_string()];
    argv.extend(args);
    match py.allow_threads(|| cdiwm::cli::run(argv)) {
        Ok(o) => Ok(o.stdout),
        Err(e) => Err(match e.exit_code() {
            2 => PyValueError::new_err(e.to_string()),
            4 => PyRuntimeError::new_err(e.to_string()),
            _ => PyArithmeticError::new_err(e.to_string()),
        }),
    }
}

#[pymodule]
#[pyo3(name = "cdiwm")]
fn cdiwm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOsa>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(postselection_probability, m)?)?;
    m.add_function(wrap_pyfunction!(weak_value, m)?)?;
    m.add_function(wrap_pyfunction!(resolution_limit, m)?)?;
    m.add_function(wrap_pyfunction!(resolution_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("PS_PER_AS", PS_PER_AS)?;
    Ok(())
}
