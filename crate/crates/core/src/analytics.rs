//! Closed-form quantities for the standard (SWM) and conjugated destructive
//! interference (CDIWM) schemes.

use std::fmt;

use crate::error::{Error, Result};
use crate::quantum::{gaussian_amplitude, postselection_probability, CouplingDelay, MeterSpec, SelectionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Standard weak measurement, operated at tau -> 0.
    Swm,
    /// Operated at the working point tau_s = epsilon / omega0.
    Cdiwm,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Swm => "SWM",
            SchemeKind::Cdiwm => "CDIWM",
        })
    }
}

/// Spectrometer resolution as an angular frequency, rad/ps.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OsaResolution(f64);

impl OsaResolution {
    pub fn new(delta_omega: f64) -> Result<Self> {
        if !(delta_omega.is_finite() && delta_omega > 0.0) {
            return Err(Error::invalid("osa resolution", "must be > 0"));
        }
        Ok(Self(delta_omega))
    }

    pub fn radps(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftReport {
    pub mean_shift: f64,
    /// rad/ps per ps
    pub shift_rate: f64,
    pub probability: f64,
}

pub fn shift_report(meter: MeterSpec, sel: SelectionSpec, tau: CouplingDelay) -> Result<ShiftReport> {
    Ok(ShiftReport {
        mean_shift: mean_spectral_shift(meter, sel, tau)?,
        shift_rate: shift_rate(meter, sel, tau)?,
        probability: postselection_probability(meter, sel, tau),
    })
}

/// Shift of the postselected spectral centroid from omega0.
pub fn mean_spectral_shift(meter: MeterSpec, sel: SelectionSpec, tau: CouplingDelay) -> Result<f64> {
    let p = postselection_probability(meter, sel, tau);
    if !(p > 0.0) {
        return Err(Error::UndefinedShift { probability: p });
    }
    let t = tau.ps();
    let d2 = meter.delta() * meter.delta();
    let phase = 2.0 * (meter.omega0() * t - sel.epsilon());
    Ok(t * d2 / (2.0 * p) * (-d2 * t * t).exp() * phase.sin())
}

const RATE_MAX_HALVINGS: usize = 40;
const RATE_TOLERANCE: f64 = 1e-6;

/// Slope of [`mean_spectral_shift`] in tau (rad/ps per ps) by adaptive central
/// difference: starting from `h = 1e-4 * tau_s`, h is halved until two
/// successive estimates agree to 1e-6 relative.
pub fn shift_rate(meter: MeterSpec, sel: SelectionSpec, tau: CouplingDelay) -> Result<f64> {
    let t = tau.ps();
    mean_spectral_shift(meter, sel, tau)?;
    let scale = if sel.epsilon() != 0.0 {
        (sel.epsilon() / meter.omega0()).abs()
    } else {
        1.0 / meter.omega0()
    };
    let central = |h: f64| -> Result<f64> {
        let up = mean_spectral_shift(meter, sel, CouplingDelay::new(t + h)?)?;
        let down = mean_spectral_shift(meter, sel, CouplingDelay::new(t - h)?)?;
        Ok((up - down) / (2.0 * h))
    };
    let mut h = 1e-4 * scale;
    let mut prev = central(h)?;
    let mut change = f64::INFINITY;
    for _ in 0..RATE_MAX_HALVINGS {
        h *= 0.5;
        let next = central(h)?;
        change = (next - prev).abs();
        if change <= RATE_TOLERANCE * next.abs() || (next == 0.0 && prev == 0.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NoConvergence {
        last_change: change / prev.abs(),
    })
}

/// Working point tau_s = epsilon / omega0, where the extinction sits at omega0.
pub fn cdi_working_point(meter: MeterSpec, sel: SelectionSpec) -> CouplingDelay {
    CouplingDelay::new(sel.epsilon() / meter.omega0()).expect("finite by construction")
}

/// Minimizer of the exact postselection probability in `[0.5, 1.5] * tau_s`,
/// found by bisection on the sign of dP/dtau.
pub fn refined_working_point(meter: MeterSpec, sel: SelectionSpec) -> Result<CouplingDelay> {
    let ts = sel.epsilon() / meter.omega0();
    if ts == 0.0 {
        return CouplingDelay::new(0.0);
    }
    let d2 = meter.delta() * meter.delta();
    let w0 = meter.omega0();
    // dP/dtau without the positive factor exp(-delta^2 tau^2)
    let slope = |t: f64| {
        let x = 2.0 * (w0 * t - sel.epsilon());
        d2 * t * x.cos() + w0 * x.sin()
    };
    let (mut lo, mut hi) = if ts > 0.0 {
        (0.5 * ts, 1.5 * ts)
    } else {
        (1.5 * ts, 0.5 * ts)
    };
    if slope(lo) >= 0.0 || slope(hi) <= 0.0 {
        return Err(Error::invalid(
            "epsilon",
            "probability has no interior minimum near epsilon / omega0",
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    CouplingDelay::new(0.5 * (lo + hi))
}

/// Small-coupling spectrum `epsilon^2 |f(omega)|^2`.
pub fn swm_spectrum_limit(meter: MeterSpec, sel: SelectionSpec, omega: f64) -> f64 {
    let f = gaussian_amplitude(meter, omega);
    sel.epsilon().powi(2) * f * f
}

/// Weak-value prediction `cot(epsilon) delta^2 dtau` of the meter shift.
///
/// The exact centroid at small tau is `-cot(epsilon) delta^2 tau`; callers
/// comparing the two should compare magnitudes.
pub fn swm_shift_approx(meter: MeterSpec, sel: SelectionSpec, dtau: CouplingDelay) -> Result<f64> {
    if sel.epsilon() == 0.0 {
        return Err(Error::SingularPostselection);
    }
    Ok(meter.delta().powi(2) * dtau.ps() / sel.epsilon().tan())
}

/// Smallest resolvable delay (ps) for a spectrometer of resolution `osa`.
pub fn resolution_limit(scheme: SchemeKind, meter: MeterSpec, sel: SelectionSpec, osa: OsaResolution) -> f64 {
    let numerator = sel.epsilon().abs() * osa.radps();
    match scheme {
        SchemeKind::Swm => numerator / meter.delta().powi(2),
        SchemeKind::Cdiwm => numerator / (2.0 * meter.omega0().powi(2)),
    }
}

/// Small-angle postselection probability at each scheme's operating point.
pub fn postselection_probability_approx(scheme: SchemeKind, meter: MeterSpec, sel: SelectionSpec) -> f64 {
    let e2 = sel.epsilon().powi(2);
    match scheme {
        SchemeKind::Swm => e2,
        SchemeKind::Cdiwm => meter.delta().powi(2) * e2 / (2.0 * meter.omega0().powi(2)),
    }
}
