//! Time-domain density of the postselected meter.
//!
//! Convention: `A(t) = (2 pi)^{-1/2} \int a(omega) exp(-i omega t) d omega`, so that
//! `\int |A|^2 dt = \int |a|^2 d omega` equals the postselection probability.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::quantum::gaussian_amplitude;

use super::quadrature::trapezoid;

/// Spectral mass allowed within three points of the transform band edge.
pub const ALIASING_TOLERANCE: f64 = 1e-8;

/// Time-domain density on a uniform grid `t_min + k * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalDensitySamples {
    pub t_min: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl TemporalDensitySamples {
    pub fn time(&self, k: usize) -> f64 {
        self.t_min + self.step * k as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.time(k)).collect()
    }

    /// Riemann sum over the periodic window.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step
    }

    /// Index of `t = 0` on the grid.
    pub fn origin_index(&self) -> usize {
        self.values.len() / 2
    }
}

/// Postselected density `|A(t)|^2` via FFT of the sampled spectral amplitude.
///
/// The window is `[-W, W)` with `W = window_factor / delta`; the implied
/// frequency grid is centered on omega0 with spacing `pi / W`.
pub fn time_domain_density(config: &ExperimentConfig) -> Result<TemporalDensitySamples> {
    config.validate()?;
    let meter = config.meter;
    let n = config.time_grid.n_points;
    if config.time_grid.window_factor < 5.0 {
        return Err(Error::invalid(
            "time.window_factor",
            "time window must span at least 10 / delta",
        ));
    }
    let half_window = config.time_grid.window_factor / meter.delta();
    let dt = 2.0 * half_window / n as f64;
    let dw = 2.0 * PI / (n as f64 * dt);

    let tau = config.tau.ps();
    let phase0 = meter.omega0() * tau - config.selection.epsilon();
    let half = (n / 2) as f64;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let x = (k as f64 - half) * dw;
            let a = gaussian_amplitude(meter, meter.omega0() + x) * (x * tau + phase0).sin();
            // (-1)^k re-centers the time axis on t = 0
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * a, 0.0)
        })
        .collect();

    let total: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
    if total > 0.0 {
        let edge: f64 = buf[..3].iter().chain(&buf[n - 3..]).map(|c| c.norm_sqr()).sum();
        let fraction = edge / total;
        if fraction > ALIASING_TOLERANCE {
            return Err(Error::Aliasing {
                edge_fraction: fraction,
            });
        }
    }

    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let scale = dw / (2.0 * PI).sqrt();
    let values = buf.iter().map(|c| (c * scale).norm_sqr()).collect();
    Ok(TemporalDensitySamples {
        t_min: -half * dt,
        step: dt,
        values,
    })
}

/// Closed-form time density under the same normalization as
/// [`time_domain_density`]: each delayed Gaussian transforms exactly, giving
/// `delta / (4 sqrt(pi)) * [(u- - u+)^2 + 4 u- u+ sin^2(omega0 tau - epsilon)]`
/// with `u-+ = exp(-delta^2 (t -+ tau)^2 / 2)`.
pub fn analytic_time_density(config: &ExperimentConfig, t: f64) -> f64 {
    let d = config.meter.delta();
    let tau = config.tau.ps();
    let u_minus = (-0.5 * (d * (t - tau)).powi(2)).exp();
    let u_plus = (-0.5 * (d * (t + tau)).powi(2)).exp();
    let s = (config.meter.omega0() * tau - config.selection.epsilon()).sin();
    d / (4.0 * PI.sqrt()) * ((u_minus - u_plus).powi(2) + 4.0 * u_minus * u_plus * s * s)
}

/// Relative L2 distance between the transform path and the closed form.
pub fn relative_l2_error(config: &ExperimentConfig, samples: &TemporalDensitySamples) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, v) in samples.values.iter().enumerate() {
        let exact = analytic_time_density(config, samples.time(k));
        num += (v - exact).powi(2);
        den += exact * exact;
    }
    (num / den).sqrt()
}

/// Trapezoid integral of the closed form over the sample window.
pub fn analytic_time_integral(config: &ExperimentConfig, samples: &TemporalDensitySamples) -> f64 {
    let v: Vec<f64> = (0..samples.values.len())
        .map(|k| analytic_time_density(config, samples.time(k)))
        .collect();
    trapezoid(&v, samples.step)
}
