//! Optical spectrum analyzer model, photon shot noise, and delay estimation.
//!
//! All wavelength/frequency conversions live here; the only other unit
//! constant in the crate is [`crate::quantum::PS_PER_AS`].

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::analytics::{self, OsaResolution, SchemeKind};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::numerics::{sample_spectrum, SpectralDensitySamples};
use crate::quantum::{postselection_probability, CouplingDelay, MeterSpec};

pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 2.99792458e5;

/// FWHM / standard deviation of a Gaussian.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// One-sided confidence of the Monte-Carlo null threshold.
pub const NULL_QUANTILE: f64 = 0.95;

/// Minimum number of tau points in the likelihood grid.
pub const LIKELIHOOD_GRID_POINTS: usize = 257;

pub fn wavelength_to_angular(lambda_nm: f64) -> Result<f64> {
    if !(lambda_nm.is_finite() && lambda_nm > 0.0) {
        return Err(Error::invalid("wavelength", format!("must be > 0 nm, got {lambda_nm}")));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT_NM_PER_PS / lambda_nm)
}

/// Angular-frequency width of a small wavelength interval, `2 pi c dl / l^2`.
pub fn wavelength_interval_to_angular(width_nm: f64, center_nm: f64) -> Result<f64> {
    let omega = wavelength_to_angular(center_nm)?;
    if !(width_nm.is_finite() && width_nm > 0.0) {
        return Err(Error::invalid("wavelength interval", "must be > 0 nm"));
    }
    Ok(omega * width_nm / center_nm)
}

/// Spectrometer specified in its native wavelength units.
///
/// The span is mapped to an angular-frequency window centered on the center
/// wavelength using the same differential rule as the resolution, and divided
/// into `n_bins` equal bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsaSpec {
    pub center_wavelength: f64,
    pub resolution_wavelength: f64,
    pub span_wavelength: f64,
    pub n_bins: usize,
}

impl Default for OsaSpec {
    fn default() -> Self {
        Self {
            center_wavelength: 800.0,
            resolution_wavelength: 0.01,
            span_wavelength: 700.0,
            n_bins: 2048,
        }
    }
}

impl OsaSpec {
    pub fn new(
        center_wavelength: f64,
        resolution_wavelength: f64,
        span_wavelength: f64,
        n_bins: usize,
    ) -> Result<Self> {
        let spec = Self {
            center_wavelength,
            resolution_wavelength,
            span_wavelength,
            n_bins,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        wavelength_to_angular(self.center_wavelength)?;
        if !(self.resolution_wavelength.is_finite() && self.resolution_wavelength > 0.0) {
            return Err(Error::invalid("osa.resolution_nm", "must be > 0"));
        }
        if !(self.span_wavelength.is_finite() && self.span_wavelength > 0.0) {
            return Err(Error::invalid("osa.span_nm", "must be > 0"));
        }
        if self.n_bins < 8 {
            return Err(Error::invalid("osa.n_bins", "must be >= 8"));
        }
        if self.span_omega().0 <= 0.0 {
            return Err(Error::invalid("osa.span_nm", "span reaches zero frequency"));
        }
        Ok(())
    }

    pub fn center_omega(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT_NM_PER_PS / self.center_wavelength
    }

    pub fn resolution(&self) -> OsaResolution {
        let w = self.center_omega() * self.resolution_wavelength / self.center_wavelength;
        OsaResolution::new(w).expect("validated")
    }

    pub fn span_omega(&self) -> (f64, f64) {
        let half = 0.5 * self.center_omega() * self.span_wavelength / self.center_wavelength;
        (self.center_omega() - half, self.center_omega() + half)
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let (lo, hi) = self.span_omega();
        let w = (hi - lo) / self.n_bins as f64;
        (0..=self.n_bins).map(|k| lo + w * k as f64).collect()
    }

    /// The span must cover at least six widths of the meter.
    pub fn check_coverage(&self, meter: MeterSpec) -> Result<()> {
        let (lo, hi) = self.span_omega();
        if hi - lo < 6.0 * meter.delta() {
            return Err(Error::invalid(
                "osa.span_nm",
                format!(
                    "span covers {:.1} rad/ps, need >= 6 delta = {:.1}",
                    hi - lo,
                    6.0 * meter.delta()
                ),
            ));
        }
        Ok(())
    }
}

/// Integrated intensity per OSA bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSpectrum {
    pub edges: Vec<f64>,
    pub intensities: Vec<f64>,
}

impl BinnedSpectrum {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn total(&self) -> f64 {
        self.intensities.iter().sum()
    }

    pub fn centroid(&self) -> Result<f64> {
        weighted_centroid(&self.edges, self.intensities.iter().copied())
    }

    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(self.intensities.iter().map(|v| v / total).collect())
    }
}

fn weighted_centroid(edges: &[f64], weights: impl Iterator<Item = f64>) -> Result<f64> {
    let mid = 0.5 * (edges[0] + edges[edges.len() - 1]);
    let (mut mass, mut moment) = (0.0, 0.0);
    for (e, w) in edges.windows(2).zip(weights) {
        mass += w;
        moment += w * (0.5 * (e[0] + e[1]) - mid);
    }
    if !(mass > 0.0) {
        return Err(Error::UndefinedCentroid);
    }
    Ok(mid + moment / mass)
}

fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Smooths the samples with the instrument kernel (Gaussian, FWHM equal to
/// the resolution) and integrates the piecewise-linear result over each bin.
pub fn bin_spectrum(samples: &SpectralDensitySamples, osa: &OsaSpec) -> Result<BinnedSpectrum> {
    osa.validate()?;
    let grid = samples.grid;
    let (lo, hi) = osa.span_omega();
    if lo < grid.omega_min || hi > grid.omega_max {
        return Err(Error::SpanMismatch {
            lo,
            hi,
            grid_lo: grid.omega_min,
            grid_hi: grid.omega_max,
        });
    }
    let smoothed = convolve_gaussian(&samples.values, grid.step(), osa.resolution().radps() / FWHM_PER_SIGMA);
    let edges = osa.bin_edges();
    let intensities = edges
        .windows(2)
        .map(|e| integrate_linear(&smoothed, grid.omega_min, grid.step(), e[0], e[1]))
        .collect();
    Ok(BinnedSpectrum { edges, intensities })
}

/// Discrete convolution with cell-integrated Gaussian weights normalized to
/// unit sum; reduces to the identity when sigma is far below the step.
fn convolve_gaussian(values: &[f64], step: f64, sigma: f64) -> Vec<f64> {
    let reach = (8.0 * sigma / step).ceil() as i64;
    let reach = reach.max(1);
    let weights: Vec<f64> = (-reach..=reach)
        .map(|k| {
            let k = k as f64;
            standard_normal_cdf((k + 0.5) * step / sigma) - standard_normal_cdf((k - 0.5) * step / sigma)
        })
        .collect();
    let norm: f64 = weights.iter().sum();
    let n = values.len() as i64;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, w) in weights.iter().enumerate() {
                let src = i + j as i64 - reach;
                if (0..n).contains(&src) {
                    acc += w * values[src as usize];
                }
            }
            acc / norm
        })
        .collect()
}

/// Exact integral of the linear interpolant of `values` over `[a, b]`.
fn integrate_linear(values: &[f64], x0: f64, step: f64, a: f64, b: f64) -> f64 {
    let last = values.len() - 2;
    let first_seg = (((a - x0) / step).floor().max(0.0) as usize).min(last);
    let last_seg = (((b - x0) / step).floor().max(0.0) as usize).min(last);
    let mut acc = 0.0;
    for j in first_seg..=last_seg {
        let left = x0 + step * j as f64;
        let u0 = ((a - left) / step).clamp(0.0, 1.0);
        let u1 = ((b - left) / step).clamp(0.0, 1.0);
        if u1 <= u0 {
            continue;
        }
        let (y0, y1) = (values[j], values[j + 1]);
        acc += step * (y0 * (u1 - u0) + 0.5 * (y1 - y0) * (u1 * u1 - u0 * u0));
    }
    acc
}

/// Photon counts per OSA bin from one simulated acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total_photons: u64,
    pub seed: u64,
}

impl CountRecord {
    pub fn centroid(&self) -> Result<f64> {
        weighted_centroid(&self.bin_edges, self.counts.iter().map(|&c| c as f64))
    }

    /// Standard deviation of detected photon frequencies (bin centers).
    pub fn spread(&self) -> Result<f64> {
        let mean = self.centroid()?;
        let mut acc = 0.0;
        for (e, &c) in self.bin_edges.windows(2).zip(&self.counts) {
            acc += c as f64 * (0.5 * (e[0] + e[1]) - mean).powi(2);
        }
        Ok((acc / self.total_photons as f64).sqrt())
    }
}

/// Multinomial draw of `total_photons` over the normalized bins, by sequential
/// conditional binomials. Deterministic for a given seed.
pub fn sample_counts(binned: &BinnedSpectrum, total_photons: u64, seed: u64) -> Result<CountRecord> {
    let probs = binned.probabilities()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = total_photons;
    let mut remaining_p = 1.0f64;
    let last = probs.len() - 1;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == last {
            counts[k] = remaining;
            break;
        }
        let q = if remaining_p > 0.0 {
            (p / remaining_p).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let draw = Binomial::new(remaining, q).expect("q in [0, 1]").sample(&mut rng);
        counts[k] = draw;
        remaining -= draw;
        remaining_p -= p;
    }
    Ok(CountRecord {
        bin_edges: binned.edges.clone(),
        counts,
        total_photons,
        seed,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed: `splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index)`.
pub fn trial_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    CentroidInversion,
    GridLikelihood,
}

impl EstimateMethod {
    pub fn name(self) -> &'static str {
        match self {
            EstimateMethod::CentroidInversion => "centroid-inversion",
            EstimateMethod::GridLikelihood => "grid-likelihood",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    /// ps
    pub tau_hat: f64,
    /// ps
    pub stderr: f64,
    pub method: EstimateMethod,
}

/// Noiseless binned model spectrum at delay `tau`.
pub fn model_binned(config: &ExperimentConfig, osa: &OsaSpec, tau: f64) -> Result<BinnedSpectrum> {
    let samples = sample_spectrum(&config.with_tau(CouplingDelay::new(tau)?))?;
    bin_spectrum(&samples, osa)
}

/// Predicted log bin probabilities over a uniform tau grid.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    taus: Vec<f64>,
    log_probs: Vec<Vec<f64>>,
    n_bins: usize,
}

impl LikelihoodModel {
    pub fn new(config: &ExperimentConfig, osa: &OsaSpec, window: (f64, f64), n_points: usize) -> Result<Self> {
        let (lo, hi) = window;
        if !(hi > lo) || n_points < 3 {
            return Err(Error::invalid("search window", "need hi > lo and >= 3 points"));
        }
        let step = (hi - lo) / (n_points - 1) as f64;
        let taus: Vec<f64> = (0..n_points).map(|i| lo + step * i as f64).collect();
        let log_probs = taus
            .par_iter()
            .map(|&t| {
                let p = model_binned(config, osa, t)?.probabilities()?;
                Ok(p.iter().map(|&q| q.max(f64::MIN_POSITIVE).ln()).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self {
            taus,
            log_probs,
            n_bins: osa.n_bins,
        })
    }

    pub fn log_likelihood(&self, record: &CountRecord) -> Vec<f64> {
        self.log_probs
            .iter()
            .map(|lp| {
                record
                    .counts
                    .iter()
                    .zip(lp)
                    .filter(|(&c, _)| c > 0)
                    .map(|(&c, &l)| c as f64 * l)
                    .sum()
            })
            .collect()
    }

    /// Grid maximum refined by a parabola through its neighbours; the stderr
    /// comes from the parabola's curvature.
    pub fn estimate(&self, record: &CountRecord) -> Result<EstimateReport> {
        if record.counts.len() != self.n_bins {
            return Err(Error::NoEstimate("record does not match the OSA binning".into()));
        }
        if record.total_photons == 0 || record.counts.iter().all(|&c| c == 0) {
            return Err(Error::NoEstimate("likelihood is flat: no photons".into()));
        }
        let ll = self.log_likelihood(record);
        let (best, _) = ll.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
        if best == 0 || best + 1 == ll.len() {
            return Err(Error::NoEstimate("likelihood maximum on the search window edge".into()));
        }
        let step = self.taus[1] - self.taus[0];
        let (l0, l1, l2) = (ll[best - 1], ll[best], ll[best + 1]);
        let curvature = (l0 - 2.0 * l1 + l2) / (step * step);
        if !(curvature < 0.0) {
            return Err(Error::NoEstimate("likelihood is flat around its maximum".into()));
        }
        let offset = 0.5 * (l0 - l2) / (l0 - 2.0 * l1 + l2);
        Ok(EstimateReport {
            tau_hat: self.taus[best] + offset * step,
            stderr: (-1.0 / curvature).sqrt(),
            method: EstimateMethod::GridLikelihood,
        })
    }
}

/// Estimates the delay from a count record.
///
/// `GridLikelihood` maximizes the multinomial likelihood over
/// [`LIKELIHOOD_GRID_POINTS`] delays in `window`. `CentroidInversion` solves
/// `mean_spectral_shift(tau) = measured shift` by bisection, requiring the
/// window to bracket the measured value.
pub fn estimate_tau(
    record: &CountRecord,
    config: &ExperimentConfig,
    osa: &OsaSpec,
    window: (f64, f64),
    method: EstimateMethod,
) -> Result<EstimateReport> {
    if record.total_photons == 0 {
        return Err(Error::NoEstimate("likelihood is flat: no photons".into()));
    }
    match method {
        EstimateMethod::GridLikelihood => {
            LikelihoodModel::new(config, osa, window, LIKELIHOOD_GRID_POINTS)?.estimate(record)
        }
        EstimateMethod::CentroidInversion => invert_centroid(record, config, window),
    }
}

fn invert_centroid(record: &CountRecord, config: &ExperimentConfig, window: (f64, f64)) -> Result<EstimateReport> {
    let (meter, sel) = (config.meter, config.selection);
    let measured = record.centroid()? - meter.omega0();
    let residual = |t: f64| -> Result<f64> {
        analytics::mean_spectral_shift(meter, sel, CouplingDelay::new(t)?)
            .map(|s| s - measured)
            .map_err(|e| Error::NoEstimate(e.to_string()))
    };
    let (mut lo, mut hi) = window;
    let (mut r_lo, r_hi) = (residual(lo)?, residual(hi)?);
    if r_lo * r_hi > 0.0 {
        return Err(Error::NoEstimate(format!(
            "window does not bracket the measured shift {measured:e} rad/ps"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let r = residual(mid)?;
        if r == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (r < 0.0) == (r_lo < 0.0) {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
        }
    }
    let tau_hat = 0.5 * (lo + hi);
    let slope = analytics::shift_rate(meter, sel, CouplingDelay::new(tau_hat)?)
        .map_err(|e| Error::NoEstimate(e.to_string()))?;
    let sigma_mean = record.spread()? / (record.total_photons as f64).sqrt();
    Ok(EstimateReport {
        tau_hat,
        stderr: sigma_mean / slope.abs(),
        method: EstimateMethod::CentroidInversion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSettings {
    /// Photons per trial (postselected), or source photons when
    /// `source_referenced` is set.
    pub photons: u64,
    pub trials: usize,
    pub seed: u64,
    /// Scale the photon budget by the exact postselection probability.
    pub source_referenced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderPoint {
    /// ps
    pub dtau: f64,
    /// Noiseless binned-centroid displacement from the reference, rad/ps.
    pub displacement: f64,
    /// Fraction of Monte-Carlo trials beyond the null threshold.
    pub detection_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionExperiment {
    pub scheme: SchemeKind,
    /// Operating delay the perturbations are added to, ps.
    pub reference_tau: f64,
    /// Closed-form resolution limit, ps.
    pub analytic_limit: f64,
    /// OSA resolution, rad/ps.
    pub resolution: f64,
    /// Smallest perturbation whose noiseless displacement reaches one resolution element, ps.
    pub deterministic_threshold: f64,
    pub ladder: Vec<LadderPoint>,
    pub monte_carlo: Option<MonteCarloSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub photons_per_trial: Vec<u64>,
    pub null_quantile: f64,
    /// rad/ps
    pub null_threshold: f64,
    /// False detections on an independent set of null trials.
    pub false_detection_rate: f64,
    /// Smallest ladder perturbation detected in at least half the trials, ps.
    pub smallest_detected: Option<f64>,
}

/// Ladder of perturbations relative to the analytic limit: 1/4 to 64 in steps of sqrt(2).
pub fn ladder_factors() -> Vec<f64> {
    (0..=16).map(|k| 2f64.powf((k as f64 - 4.0) / 2.0)).collect()
}

fn reference_delay(scheme: SchemeKind, config: &ExperimentConfig) -> f64 {
    match scheme {
        SchemeKind::Swm => 0.0,
        SchemeKind::Cdiwm => analytics::cdi_working_point(config.meter, config.selection).ps(),
    }
}

/// Detection experiment around each scheme's operating point.
///
/// Deterministic part: displacement of the noiseless binned centroid versus
/// perturbation, and the perturbation at which it equals one OSA resolution
/// element. Monte-Carlo part (when `trials > 0`): the statistic is the signed
/// count-centroid displacement, thresholded at the null distribution's
/// [`NULL_QUANTILE`]. Trial `i` of stream `s` uses `trial_seed(seed, s, i)`;
/// stream 0 sets the threshold, stream 1 measures false detections, stream
/// `k + 2` is ladder rung `k`.
pub fn resolution_experiment(
    scheme: SchemeKind,
    config: &ExperimentConfig,
    osa: &OsaSpec,
    mc: &MonteCarloSettings,
) -> Result<ResolutionExperiment> {
    config.validate()?;
    osa.validate()?;
    osa.check_coverage(config.meter)?;
    if mc.photons == 0 {
        return Err(Error::NoEstimate("photon budget is zero".into()));
    }
    let resolution = osa.resolution();
    let analytic_limit = analytics::resolution_limit(scheme, config.meter, config.selection, resolution);
    if !(analytic_limit > 0.0) {
        return Err(Error::invalid("epsilon", "resolution limit is zero for epsilon = 0"));
    }
    let t0 = reference_delay(scheme, config);
    let reference = model_binned(config, osa, t0)?;
    let c0 = reference.centroid()?;
    let displacement = |dt: f64| -> Result<f64> { Ok(model_binned(config, osa, t0 + dt)?.centroid()? - c0) };

    let target = resolution.radps();
    let mut hi = analytic_limit;
    let mut lo = 0.0;
    let mut expansions = 0;
    while displacement(hi)?.abs() < target {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::NoEstimate(
                "displacement never reaches one resolution element".into(),
            ));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if displacement(mid)?.abs() >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-9 * hi {
            break;
        }
    }
    let deterministic_threshold = hi;

    let factors = ladder_factors();
    let dtaus: Vec<f64> = factors.iter().map(|f| f * analytic_limit).collect();
    let models = dtaus
        .par_iter()
        .map(|&dt| model_binned(config, osa, t0 + dt))
        .collect::<Result<Vec<_>>>()?;
    let displacements: Vec<f64> = models
        .iter()
        .map(|m| Ok(m.centroid()? - c0))
        .collect::<Result<Vec<_>>>()?;
    let sign = displacements[0].signum();

    let monte_carlo = if mc.trials > 0 {
        let photons_for = |t: f64| -> u64 {
            if mc.source_referenced {
                let p = postselection_probability(config.meter, config.selection, CouplingDelay::new(t).unwrap());
                (mc.photons as f64 * p).round() as u64
            } else {
                mc.photons
            }
        };
        let statistics = |binned: &BinnedSpectrum, photons: u64, stream: u64| -> Result<Vec<f64>> {
            (0..mc.trials)
                .into_par_iter()
                .map(|i| {
                    let record = sample_counts(binned, photons, trial_seed(mc.seed, stream, i as u64))?;
                    match record.centroid() {
                        Ok(c) => Ok(sign * (c - c0)),
                        Err(_) => Ok(0.0),
                    }
                })
                .collect()
        };
        let null_photons = photons_for(t0);
        if null_photons == 0 {
            return Err(Error::NoEstimate("no photons survive postselection".into()));
        }
        let mut null = statistics(&reference, null_photons, 0)?;
        null.sort_by(f64::total_cmp);
        let rank = ((NULL_QUANTILE * null.len() as f64).ceil() as usize).clamp(1, null.len());
        let null_threshold = null[rank - 1];
        let check = statistics(&reference, null_photons, 1)?;
        let false_detection_rate = fraction_above(&check, null_threshold);

        let mut photons_per_trial = vec![null_photons];
        let mut fractions = Vec::with_capacity(models.len());
        for (k, (model, dt)) in models.iter().zip(&dtaus).enumerate() {
            let photons = photons_for(t0 + dt);
            photons_per_trial.push(photons);
            let stats = statistics(model, photons, k as u64 + 2)?;
            fractions.push(fraction_above(&stats, null_threshold));
        }
        let smallest_detected = fractions
            .iter()
            .zip(&dtaus)
            .find(|(f, _)| **f >= 0.5)
            .map(|(_, &dt)| dt);
        Some((
            MonteCarloSummary {
                photons_per_trial,
                null_quantile: NULL_QUANTILE,
                null_threshold,
                false_detection_rate,
                smallest_detected,
            },
            fractions,
        ))
    } else {
        None
    };

    let ladder = dtaus
        .iter()
        .zip(&displacements)
        .enumerate()
        .map(|(k, (&dtau, &displacement))| LadderPoint {
            dtau,
            displacement,
            detection_fraction: monte_carlo.as_ref().map(|(_, f)| f[k]),
        })
        .collect();

    Ok(ResolutionExperiment {
        scheme,
        reference_tau: t0,
        analytic_limit,
        resolution: resolution.radps(),
        deterministic_threshold,
        ladder,
        monte_carlo: monte_carlo.map(|(s, _)| s),
    })
}

fn fraction_above(stats: &[f64], threshold: f64) -> f64 {
    stats.iter().filter(|&&s| s > threshold).count() as f64 / stats.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::trapezoid;
    use crate::numerics::{sample_spectrum_on, FrequencyGrid};
    use crate::quantum::SelectionSpec;

    fn config(tau_ps: f64) -> ExperimentConfig {
        ExperimentConfig::new(
            MeterSpec::new(2350.0, 200.0).unwrap(),
            SelectionSpec::new(0.02).unwrap(),
            CouplingDelay::new(tau_ps).unwrap(),
        )
    }

    fn ts() -> f64 {
        0.02 / 2350.0
    }

    #[test]
    fn wavelength_conversions() {
        assert!((wavelength_to_angular(800.0).unwrap() - 2354.56).abs() < 5e-3);
        let res = wavelength_interval_to_angular(0.01, 800.0).unwrap();
        assert!((res - 0.02944).abs() < 1e-5);
        assert!((res - 0.0294321).abs() < 1e-7);
        let w = wavelength_to_angular(650.0).unwrap();
        assert!((wavelength_to_angular(1300.0).unwrap() - 0.5 * w).abs() < 1e-12);
        assert!(wavelength_to_angular(0.0).is_err());
        assert!(wavelength_to_angular(-5.0).is_err());
        assert!((OsaSpec::default().resolution().radps() - res).abs() < 1e-15);
    }

    #[test]
    fn osa_validation() {
        assert!(OsaSpec::new(800.0, 0.0, 700.0, 2048).is_err());
        assert!(OsaSpec::new(800.0, 0.01, 700.0, 4).is_err());
        assert!(OsaSpec::new(800.0, 0.01, 1700.0, 64).is_err());
        let narrow = OsaSpec::new(800.0, 0.01, 300.0, 64).unwrap();
        assert!(narrow.check_coverage(MeterSpec::new(2350.0, 200.0).unwrap()).is_err());
        assert!(OsaSpec::default()
            .check_coverage(MeterSpec::new(2350.0, 200.0).unwrap())
            .is_ok());
    }

    #[test]
    fn binning_conserves_intensity() {
        for tau in [0.0, ts(), 8e-6] {
            let s = sample_spectrum(&config(tau)).unwrap();
            let b = bin_spectrum(&s, &OsaSpec::default()).unwrap();
            let total = s.integral();
            assert!(((b.total() - total) / total).abs() < 1e-9, "tau={tau}");
        }
    }

    #[test]
    fn narrow_kernel_reduces_to_plain_bin_integration() {
        let s = sample_spectrum(&config(8e-6)).unwrap();
        let osa = OsaSpec::default();
        let b = bin_spectrum(&s, &osa).unwrap();
        let edges = osa.bin_edges();
        for k in [100, 1000, 1500] {
            let raw = integrate_linear(&s.values, s.grid.omega_min, s.grid.step(), edges[k], edges[k + 1]);
            assert!((b.intensities[k] - raw).abs() <= 1e-12 * raw);
        }
    }

    #[test]
    fn flat_input_gives_flat_bins() {
        let grid = FrequencyGrid::centered(2350.0, 1600.0, 1 << 14).unwrap();
        let mut s = sample_spectrum_on(
            MeterSpec::new(2350.0, 200.0).unwrap(),
            SelectionSpec::new(0.02).unwrap(),
            CouplingDelay::new(0.0).unwrap(),
            grid,
        )
        .unwrap();
        s.values.iter_mut().for_each(|v| *v = 2.5);
        let osa = OsaSpec::new(800.0, 2.0, 500.0, 64).unwrap();
        let b = bin_spectrum(&s, &osa).unwrap();
        let width = osa.bin_edges()[1] - osa.bin_edges()[0];
        for v in &b.intensities {
            assert!((v - 2.5 * width).abs() < 1e-9 * 2.5 * width);
        }
    }

    /// Brute-force oracle: spectrum resampled at a tenth of the sample step,
    /// direct Gaussian convolution, midpoint integration over the bin.
    fn oversampled_bin(cfg: &ExperimentConfig, osa: &OsaSpec, step: f64, k: usize) -> f64 {
        let edges = osa.bin_edges();
        let sigma = osa.resolution().radps() / FWHM_PER_SIGMA;
        let n_sub = ((edges[k + 1] - edges[k]) / (0.1 * step)).ceil() as usize;
        let fine = (edges[k + 1] - edges[k]) / n_sub as f64;
        let s = |w: f64| crate::quantum::spectral_density(cfg.meter, cfg.selection, cfg.tau, w);
        let kernel_pts = 400;
        let span = 8.0 * sigma;
        let dx = 2.0 * span / kernel_pts as f64;
        let smoothed = |w: f64| {
            let v: Vec<f64> = (0..=kernel_pts)
                .map(|j| {
                    let x = -span + dx * j as f64;
                    s(w - x) * (-0.5 * (x / sigma).powi(2)).exp()
                })
                .collect();
            trapezoid(&v, dx) / (sigma * (2.0 * PI).sqrt())
        };
        (0..n_sub)
            .map(|j| smoothed(edges[k] + fine * (j as f64 + 0.5)) * fine)
            .sum()
    }

    #[test]
    fn extinction_notch_partially_filled() {
        let cfg = config(ts());
        // coarse spectrometer so the kernel spans several samples
        let osa = OsaSpec::new(801.0, 1.0, 700.0, 256).unwrap();
        let s = sample_spectrum(&cfg).unwrap();
        let b = bin_spectrum(&s, &osa).unwrap();
        let centers = b.centers();
        let k = (0..centers.len())
            .min_by(|&i, &j| (centers[i] - 2350.0).abs().total_cmp(&(centers[j] - 2350.0).abs()))
            .unwrap();
        let min = b.intensities[k - 3..=k + 3]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        for j in [k - 1, k, k + 1, k + 40] {
            let oracle = oversampled_bin(&cfg, &osa, s.grid.step(), j);
            assert!(
                ((b.intensities[j] - oracle) / oracle).abs() < 5e-3,
                "bin {j}: {} vs {oracle}",
                b.intensities[j]
            );
        }
    }

    #[test]
    fn span_outside_samples_is_rejected() {
        let mut c = config(0.0);
        c.spectral_grid.span_sigmas = 3.0;
        let s = sample_spectrum(&c).unwrap();
        assert!(matches!(
            bin_spectrum(&s, &OsaSpec::default()),
            Err(Error::SpanMismatch { .. })
        ));
    }

    fn binned(tau: f64) -> BinnedSpectrum {
        model_binned(&config(tau), &OsaSpec::default(), tau).unwrap()
    }

    #[test]
    fn zero_photons_gives_zero_counts() {
        let r = sample_counts(&binned(ts()), 0, 7).unwrap();
        assert!(r.counts.iter().all(|&c| c == 0));
        assert_eq!(r.total_photons, 0);
    }

    #[test]
    fn zero_mass_is_rejected() {
        let b = BinnedSpectrum {
            edges: vec![0.0, 1.0, 2.0],
            intensities: vec![0.0, 0.0],
        };
        assert_eq!(sample_counts(&b, 10, 1), Err(Error::ZeroMass));
    }

    #[test]
    fn counts_are_reproducible_and_sum_to_total() {
        let b = binned(ts());
        let a = sample_counts(&b, 1_000_000, 42).unwrap();
        let c = sample_counts(&b, 1_000_000, 42).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.counts.iter().sum::<u64>(), 1_000_000);
        let d = sample_counts(&b, 1_000_000, 43).unwrap();
        assert_ne!(a.counts, d.counts);
    }

    #[test]
    fn counts_follow_bin_probabilities() {
        let b = binned(8e-6);
        let probs = b.probabilities().unwrap();
        let n = 10_000_000u64;
        let r = sample_counts(&b, n, 2024).unwrap();
        for (&c, &p) in r.counts.iter().zip(&probs) {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - n as f64 * p).abs() <= 5.0 * sigma.max(1.0));
        }
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..4 {
            for i in 0..500 {
                assert!(seen.insert(trial_seed(9, s, i)));
            }
        }
        assert_eq!(trial_seed(1, 2, 3), trial_seed(1, 2, 3));
    }

    fn noiseless_record(tau: f64, total: f64) -> CountRecord {
        let b = binned(tau);
        let counts: Vec<u64> = b
            .probabilities()
            .unwrap()
            .iter()
            .map(|p| (p * total).round() as u64)
            .collect();
        let total_photons = counts.iter().sum();
        CountRecord {
            bin_edges: b.edges,
            counts,
            total_photons,
            seed: 0,
        }
    }

    #[test]
    fn likelihood_recovers_noiseless_truth() {
        let truth = ts() + 1e-9;
        let record = noiseless_record(truth, 1e12);
        let window = (ts() - 5e-9, ts() + 5e-9);
        let est = estimate_tau(
            &record,
            &config(ts()),
            &OsaSpec::default(),
            window,
            EstimateMethod::GridLikelihood,
        )
        .unwrap();
        assert_eq!(est.method, EstimateMethod::GridLikelihood);
        assert!((est.tau_hat - truth).abs() < 1e-11, "{} vs {truth}", est.tau_hat);
        assert!(est.stderr > 0.0);
    }

    #[test]
    fn centroid_inversion_at_working_point() {
        let record = noiseless_record(ts(), 1e12);
        let window = (0.9 * ts(), 1.1 * ts());
        let est = estimate_tau(
            &record,
            &config(ts()),
            &OsaSpec::default(),
            window,
            EstimateMethod::CentroidInversion,
        )
        .unwrap();
        assert!((est.tau_hat - ts()).abs() < 1e-15, "{}", est.tau_hat - ts());

        let shifted = noiseless_record(ts() + 2e-9, 1e12);
        let est = estimate_tau(
            &shifted,
            &config(ts()),
            &OsaSpec::default(),
            window,
            EstimateMethod::CentroidInversion,
        )
        .unwrap();
        assert!((est.tau_hat - ts() - 2e-9).abs() < 1e-13);
    }

    #[test]
    fn estimation_needs_photons_and_bracket() {
        let mut record = noiseless_record(ts(), 1e6);
        let window = (0.9 * ts(), 1.1 * ts());
        let cfg = config(ts());
        let osa = OsaSpec::default();
        let far = estimate_tau(
            &record,
            &cfg,
            &osa,
            (2.0 * ts(), 3.0 * ts()),
            EstimateMethod::CentroidInversion,
        );
        assert!(matches!(far, Err(Error::NoEstimate(_))));
        record.counts.iter_mut().for_each(|c| *c = 0);
        record.total_photons = 0;
        for m in [EstimateMethod::GridLikelihood, EstimateMethod::CentroidInversion] {
            assert!(matches!(
                estimate_tau(&record, &cfg, &osa, window, m),
                Err(Error::NoEstimate(_))
            ));
        }
    }

    #[test]
    fn likelihood_is_unbiased_over_trials() {
        let truth = ts() + 1e-9;
        let cfg = config(ts());
        let osa = OsaSpec::default();
        let model = LikelihoodModel::new(&cfg, &osa, (ts() - 8e-9, ts() + 1e-8), LIKELIHOOD_GRID_POINTS).unwrap();
        let b = binned(truth);
        let estimates: Vec<EstimateReport> = (0..200)
            .into_par_iter()
            .map(|i| {
                model
                    .estimate(&sample_counts(&b, 1_000_000, trial_seed(11, 0, i)).unwrap())
                    .unwrap()
            })
            .collect();
        let n = estimates.len() as f64;
        let mean = estimates.iter().map(|e| e.tau_hat).sum::<f64>() / n;
        let var = estimates.iter().map(|e| (e.tau_hat - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let stderr_of_mean = (var / n).sqrt();
        assert!(
            (mean - truth).abs() < 2.0 * stderr_of_mean,
            "{mean} vs {truth} ({stderr_of_mean})"
        );
        // curvature stderr consistent with the observed scatter
        let reported = estimates.iter().map(|e| e.stderr).sum::<f64>() / n;
        assert!(
            (reported / var.sqrt() - 1.0).abs() < 0.25,
            "{reported} vs {}",
            var.sqrt()
        );
    }

    #[test]
    fn estimates_are_deterministic() {
        let b = binned(ts() + 1e-9);
        let record = sample_counts(&b, 1_000_000, 5).unwrap();
        let window = (ts() - 5e-9, ts() + 1e-8);
        let cfg = config(ts());
        let a = estimate_tau(
            &record,
            &cfg,
            &OsaSpec::default(),
            window,
            EstimateMethod::GridLikelihood,
        )
        .unwrap();
        let c = estimate_tau(
            &record,
            &cfg,
            &OsaSpec::default(),
            window,
            EstimateMethod::GridLikelihood,
        )
        .unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn deterministic_thresholds_track_analytic_limits() {
        let cfg = config(ts());
        let osa = OsaSpec::default();
        let mc = MonteCarloSettings {
            photons: 1_000_000,
            trials: 0,
            seed: 1,
            source_referenced: false,
        };
        let cdiwm = resolution_experiment(SchemeKind::Cdiwm, &cfg, &osa, &mc).unwrap();
        let swm = resolution_experiment(SchemeKind::Swm, &cfg, &osa, &mc).unwrap();
        for r in [&cdiwm, &swm] {
            let ratio = r.deterministic_threshold / r.analytic_limit;
            assert!((1.0 / 3.0..=3.0).contains(&ratio), "{}: {ratio}", r.scheme);
            assert!(r.monte_carlo.is_none());
        }
        let ratio = swm.deterministic_threshold / cdiwm.deterministic_threshold;
        assert!((ratio / 276.125 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn zero_photons_is_an_estimation_error() {
        let mc = MonteCarloSettings {
            photons: 0,
            trials: 10,
            seed: 1,
            source_referenced: false,
        };
        let r = resolution_experiment(SchemeKind::Cdiwm, &config(ts()), &OsaSpec::default(), &mc);
        assert!(matches!(r, Err(Error::NoEstimate(_))));
    }
}
