//! Subcommand implementations producing [`OutputTable`]s.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::analytics::{
    cdi_working_point, mean_spectral_shift, postselection_probability_approx, refined_working_point, resolution_limit,
    shift_rate, SchemeKind,
};
use crate::config::ExperimentConfig;
use crate::instrument::{bin_spectrum, ladder_factors, resolution_experiment, ResolutionExperiment, NULL_QUANTILE};
use crate::numerics::{
    centroid_shift, extinction_frequency, peak_positions, relative_l2_error, sample_spectrum, time_domain_density,
    PeakPositions,
};
use crate::quantum::{postselection_probability, CouplingDelay, SelectionSpec, PS_PER_AS};

use super::config::RunConfig;
use super::output::{num, OutputTable};
use super::CliError;

fn finish(mut table: OutputTable, command: &str, run: &RunConfig, warnings: Vec<String>) -> OutputTable {
    table.meta("tool", "cdiwm");
    table.meta("version", env!("CARGO_PKG_VERSION"));
    table.meta("command", command);
    table.meta("config", run.to_text());
    table.meta("warnings", warnings);
    table
}

/// Keeps the value, or records the error as a warning.
fn soft<T>(r: crate::Result<T>, what: &str, warnings: &mut Vec<String>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("{what}: {e}"));
            None
        }
    }
}

fn peaks_json(p: Option<PeakPositions>) -> Value {
    match p {
        None => Value::Null,
        Some(p) => {
            let (low, high) = p.omegas();
            json!({ "low_radps": num(low), "high_radps": num(high), "single": p.is_single() })
        }
    }
}

pub fn spectrum(run: &RunConfig) -> Result<OutputTable, CliError> {
    let exp = run.experiment()?;
    let osa = run.osa()?;
    let (meter, sel, tau) = (exp.meter, exp.selection, exp.tau);
    let samples = sample_spectrum(&exp)?;
    let mut warnings = samples.warnings.clone();

    let binned = soft(
        osa.check_coverage(meter).and_then(|_| bin_spectrum(&samples, &osa)),
        "S_binned",
        &mut warnings,
    );
    let mut table = OutputTable::new(
        "spectrum",
        &[("omega_radps", "rad/ps"), ("S", "ps/rad"), ("S_binned", "ps/rad")],
    );
    for (omega, &s) in samples.omegas().into_iter().zip(&samples.values) {
        let sb = binned.as_ref().map_or(f64::NAN, |b| {
            let j = b.edges.partition_point(|&e| e <= omega);
            if j == 0 || j >= b.edges.len() {
                f64::NAN
            } else {
                b.intensities[j - 1] / (b.edges[j] - b.edges[j - 1])
            }
        });
        table.push(vec![omega, s, sb]);
    }

    let extinction = extinction_frequency(sel, tau).ok();
    let peaks = soft(peak_positions(&samples, extinction), "peaks", &mut warnings);
    let mean_shift = soft(mean_spectral_shift(meter, sel, tau), "mean_shift", &mut warnings);
    let centroid = soft(centroid_shift(&samples), "centroid_shift", &mut warnings);
    let binned_centroid = binned
        .as_ref()
        .and_then(|b| soft(b.centroid(), "binned_centroid", &mut warnings));
    let refined = soft(
        refined_working_point(meter, sel),
        "refined_working_point",
        &mut warnings,
    );

    table.meta("extinction_radps", extinction.map_or(Value::Null, num));
    table.meta("peaks", peaks_json(peaks));
    table.meta("probability", num(postselection_probability(meter, sel, tau)));
    table.meta("probability_quadrature", num(samples.integral()));
    table.meta("mean_shift_radps", mean_shift.map_or(Value::Null, num));
    table.meta("centroid_shift_radps", centroid.map_or(Value::Null, num));
    table.meta(
        "binned_centroid_shift_radps",
        binned_centroid.map_or(Value::Null, |c| num(c - meter.omega0())),
    );
    table.meta("working_point_as", num(cdi_working_point(meter, sel).attoseconds()));
    table.meta(
        "refined_working_point_as",
        refined.map_or(Value::Null, |t| num(t.attoseconds())),
    );
    table.meta("osa_resolution_radps", num(osa.resolution().radps()));
    table.meta(
        "S_binned_note",
        "bin intensity over bin width; NaN outside the OSA span",
    );
    Ok(finish(table, "spectrum", run, warnings))
}

pub fn timedomain(run: &RunConfig) -> Result<OutputTable, CliError> {
    let exp = run.experiment()?;
    let t = time_domain_density(&exp)?;
    let s = sample_spectrum(&exp)?;
    let warnings = s.warnings.clone();

    let mut table = OutputTable::new("timedomain", &[("t_as", "as"), ("T", "1/ps")]);
    for (k, &v) in t.values.iter().enumerate() {
        table.push(vec![t.time(k) / PS_PER_AS, v]);
    }
    let peak = t.values.iter().copied().fold(0.0, f64::max);
    let time_integral = t.integral();
    let spectral_integral = s.integral();
    table.meta("time_integral", num(time_integral));
    table.meta("spectral_integral", num(spectral_integral));
    table.meta(
        "parseval_relative_error",
        num((time_integral - spectral_integral).abs() / spectral_integral),
    );
    table.meta("analytic_l2_relative_error", num(relative_l2_error(&exp, &t)));
    table.meta("T_origin", num(t.values[t.origin_index()]));
    table.meta("T_peak", num(peak));
    table.meta(
        "probability",
        num(postselection_probability(exp.meter, exp.selection, exp.tau)),
    );
    Ok(finish(table, "timedomain", run, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Tau,
    Epsilon,
}

/// Delay used at each point of an epsilon sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// `tau = epsilon / omega0`
    Working,
    /// `tau = 0`
    Zero,
    /// The configured `tau_as`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub var: SweepVar,
    /// as for tau, rad for epsilon.
    pub from: f64,
    pub to: f64,
    pub n: usize,
    pub at: Anchor,
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "var",
    "mean_shift",
    "peak_low",
    "peak_high",
    "shift_rate",
    "P_exact",
    "P_swm_approx",
    "P_cdiwm_approx",
    "res_swm",
    "res_cdiwm",
];

fn sweep_point(
    base: &ExperimentConfig,
    run: &RunConfig,
    eps: f64,
    tau_ps: f64,
    var: f64,
) -> Result<(Vec<f64>, Vec<String>), CliError> {
    let sel = SelectionSpec::new(eps)?;
    let tau = CouplingDelay::new(tau_ps)?;
    let exp = base.with_selection(sel).with_tau(tau);
    let meter = exp.meter;
    let label = format!("var = {var:e}");
    let mut warnings = Vec::new();

    let mean = soft(
        mean_spectral_shift(meter, sel, tau),
        &format!("{label}: mean_shift"),
        &mut warnings,
    );
    let rate = soft(
        shift_rate(meter, sel, tau),
        &format!("{label}: shift_rate"),
        &mut warnings,
    );
    let samples = sample_spectrum(&exp)?;
    let peaks = soft(
        peak_positions(&samples, extinction_frequency(sel, tau).ok()),
        &format!("{label}: peaks"),
        &mut warnings,
    );
    let (low, high) = peaks.map_or((f64::NAN, f64::NAN), |p| p.omegas());
    let res = run.osa()?.resolution();
    let row = vec![
        var,
        mean.unwrap_or(f64::NAN),
        low,
        high,
        rate.map_or(f64::NAN, |r| r * PS_PER_AS),
        postselection_probability(meter, sel, tau),
        postselection_probability_approx(SchemeKind::Swm, meter, sel),
        postselection_probability_approx(SchemeKind::Cdiwm, meter, sel),
        resolution_limit(SchemeKind::Swm, meter, sel, res) / PS_PER_AS,
        resolution_limit(SchemeKind::Cdiwm, meter, sel, res) / PS_PER_AS,
    ];
    Ok((row, warnings))
}

pub fn sweep(run: &RunConfig, spec: &SweepSpec) -> Result<OutputTable, CliError> {
    if spec.n < 2 {
        return Err(CliError::Config("sweep needs --n >= 2".into()));
    }
    if !(spec.from.is_finite() && spec.to.is_finite()) {
        return Err(CliError::Config("sweep range must be finite".into()));
    }
    let base = run.experiment()?;
    let omega0 = base.meter.omega0();
    let values: Vec<f64> = (0..spec.n)
        .map(|i| spec.from + (spec.to - spec.from) * i as f64 / (spec.n - 1) as f64)
        .collect();
    let points = values
        .par_iter()
        .map(|&v| {
            let (eps, tau_ps) = match spec.var {
                SweepVar::Tau => (run.epsilon_rad, v * PS_PER_AS),
                SweepVar::Epsilon => {
                    let tau = match spec.at {
                        Anchor::Working => v / omega0,
                        Anchor::Zero => 0.0,
                        Anchor::Fixed => run.tau_as * PS_PER_AS,
                    };
                    (v, tau)
                }
            };
            sweep_point(&base, run, eps, tau_ps, v)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let (var_name, var_unit) = match spec.var {
        SweepVar::Tau => ("tau", "as"),
        SweepVar::Epsilon => ("epsilon", "rad"),
    };
    let units = [
        var_unit,
        "rad/ps",
        "rad/ps",
        "rad/ps",
        "rad/ps/as",
        "1",
        "1",
        "1",
        "as",
        "as",
    ];
    let cols: Vec<(&str, &str)> = SWEEP_COLUMNS.iter().copied().zip(units).collect();
    let mut table = OutputTable::new("sweep", &cols);
    let mut warnings = Vec::new();
    for (row, w) in points {
        table.push(row);
        warnings.extend(w);
    }
    let max_shift = table
        .column("mean_shift")
        .unwrap()
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    table.meta("variable", var_name);
    table.meta("from", num(spec.from));
    table.meta("to", num(spec.to));
    table.meta("n", spec.n);
    match spec.var {
        SweepVar::Tau => table.meta("epsilon_rad", num(run.epsilon_rad)),
        SweepVar::Epsilon => table.meta(
            "tau_rule",
            match spec.at {
                Anchor::Working => "tau = epsilon / omega0".to_string(),
                Anchor::Zero => "tau = 0".to_string(),
                Anchor::Fixed => format!("tau = {} as", run.tau_as),
            },
        ),
    }
    table.meta("max_abs_mean_shift_radps", num(max_shift));
    table.meta("peak_note", "peak_low = peak_high when only one lobe carries weight");
    Ok(finish(table, "sweep", run, warnings))
}

fn scheme_json(r: &ResolutionExperiment) -> Value {
    let mc = r.monte_carlo.as_ref().map(|m| {
        json!({
            "photons_per_trial": m.photons_per_trial,
            "null_quantile": num(m.null_quantile),
            "null_threshold_radps": num(m.null_threshold),
            "false_detection_rate": num(m.false_detection_rate),
            "smallest_detected_as": m.smallest_detected.map_or(Value::Null, |t| num(t / PS_PER_AS)),
        })
    });
    json!({
        "reference_tau_as": num(r.reference_tau / PS_PER_AS),
        "analytic_limit_as": num(r.analytic_limit / PS_PER_AS),
        "deterministic_threshold_as": num(r.deterministic_threshold / PS_PER_AS),
        "threshold_over_limit": num(r.deterministic_threshold / r.analytic_limit),
        "resolution_radps": num(r.resolution),
        "monte_carlo": mc.unwrap_or(Value::Null),
    })
}

pub fn resolve(run: &RunConfig) -> Result<OutputTable, CliError> {
    let exp = run.experiment()?;
    let osa = run.osa()?;
    let mc = run.monte_carlo();
    let cd = resolution_experiment(SchemeKind::Cdiwm, &exp, &osa, &mc)?;
    let sw = resolution_experiment(SchemeKind::Swm, &exp, &osa, &mc)?;

    let mut table = OutputTable::new(
        "resolve",
        &[
            ("ladder_factor", "1"),
            ("cdiwm_dtau_as", "as"),
            ("cdiwm_displacement", "rad/ps"),
            ("cdiwm_detection_fraction", "1"),
            ("swm_dtau_as", "as"),
            ("swm_displacement", "rad/ps"),
            ("swm_detection_fraction", "1"),
        ],
    );
    for ((f, c), s) in ladder_factors().into_iter().zip(&cd.ladder).zip(&sw.ladder) {
        table.push(vec![
            f,
            c.dtau / PS_PER_AS,
            c.displacement,
            c.detection_fraction.unwrap_or(f64::NAN),
            s.dtau / PS_PER_AS,
            s.displacement,
            s.detection_fraction.unwrap_or(f64::NAN),
        ]);
    }
    table.meta("cdiwm", scheme_json(&cd));
    table.meta("swm", scheme_json(&sw));
    table.meta(
        "deterministic_threshold_ratio",
        num(sw.deterministic_threshold / cd.deterministic_threshold),
    );
    table.meta("analytic_limit_ratio", num(sw.analytic_limit / cd.analytic_limit));
    table.meta("null_quantile", num(NULL_QUANTILE));
    table.meta(
        "detection_rule",
        "signed count-centroid displacement above the null quantile; deterministic threshold is the noiseless displacement reaching one OSA resolution element",
    );
    Ok(finish(table, "resolve", run, Vec::new()))
}

pub const FIGURES: [&str; 4] = ["fig1", "fig2", "fig4", "fig5"];

/// Delay window of the shift and probability presets, as.
pub const FIG_TAU_WINDOW: (f64, f64, usize) = (0.0, 17.0, 341);
/// Working-range inset, as.
pub const FIG_INSET_WINDOW: (f64, f64, usize) = (7.5, 9.5, 201);
/// Postselection-angle range of the resolution presets, rad.
pub const FIG_EPSILON_WINDOW: (f64, f64, usize) = (0.001, 0.1, 100);
pub const FIG1_DELAYS_AS: [f64; 5] = [7.5, 8.0, 8.5, 9.0, 9.5];

fn named(mut t: OutputTable, name: String) -> OutputTable {
    t.name = name.clone();
    t.meta("figure_table", name);
    t
}

fn tau_sweep(run: &RunConfig, eps: f64, window: (f64, f64, usize), name: &str) -> Result<OutputTable, CliError> {
    let mut r = run.clone();
    r.epsilon_rad = eps;
    let spec = SweepSpec {
        var: SweepVar::Tau,
        from: window.0,
        to: window.1,
        n: window.2,
        at: Anchor::Fixed,
    };
    Ok(named(sweep(&r, &spec)?, name.to_string()))
}

fn eps_sweep(run: &RunConfig, at: Anchor, name: &str) -> Result<OutputTable, CliError> {
    let (from, to, n) = FIG_EPSILON_WINDOW;
    let spec = SweepSpec {
        var: SweepVar::Epsilon,
        from,
        to,
        n,
        at,
    };
    Ok(named(sweep(run, &spec)?, name.to_string()))
}

/// Figure-data presets. Positive epsilon drives the CDIWM curves; the SWM
/// curves use the mirrored angle `-|epsilon|`, which has no extinction point
/// at positive delay.
pub fn figure(name: &str, run: &RunConfig) -> Result<Vec<OutputTable>, CliError> {
    let eps = run.epsilon_rad.abs();
    match name {
        "fig1" => {
            let mut tables = Vec::new();
            for tau in FIG1_DELAYS_AS {
                let mut r = run.clone();
                r.tau_as = tau;
                tables.push(named(timedomain(&r)?, format!("fig1a_time_tau{tau}as")));
                tables.push(named(spectrum(&r)?, format!("fig1b_spectrum_tau{tau}as")));
            }
            Ok(tables)
        }
        "fig2" | "fig4" => {
            let mut tables = vec![
                tau_sweep(run, eps, FIG_TAU_WINDOW, &format!("{name}_cdiwm"))?,
                tau_sweep(run, -eps, FIG_TAU_WINDOW, &format!("{name}_swm"))?,
            ];
            tables.push(tau_sweep(run, eps, FIG_INSET_WINDOW, &format!("{name}_inset"))?);
            Ok(tables)
        }
        "fig5" => Ok(vec![
            eps_sweep(run, Anchor::Working, "fig5_cdiwm")?,
            eps_sweep(run, Anchor::Zero, "fig5_swm")?,
        ]),
        other => Err(CliError::Config(format!(
            "unknown figure `{other}` (expected one of {})",
            FIGURES.join(", ")
        ))),
    }
}
