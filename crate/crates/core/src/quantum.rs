//! Polarization system, Gaussian spectral meter, delay coupling and postselection.
//!
//! Units: angular frequency in rad/ps, time in ps. The product `omega * tau`
//! is then a bare phase, and the customary "THz" figures for the meter
//! (2350, 200) are used as-is.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Picoseconds per attosecond.
pub const PS_PER_AS: f64 = 1e-6;

/// Gaussian spectral wave packet of the meter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeterSpec {
    omega0: f64,
    delta: f64,
}

impl MeterSpec {
    pub fn new(omega0: f64, delta: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::invalid(
                "omega0",
                format!("must be finite and > 0, got {omega0}"),
            ));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", format!("must be finite and > 0, got {delta}")));
        }
        Ok(Self { omega0, delta })
    }

    /// Center angular frequency, rad/ps.
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// 1/e amplitude half-width, rad/ps.
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Pre/postselection pair, parameterized by the postselection angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionSpec {
    epsilon: f64,
}

impl SelectionSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon.abs() >= FRAC_PI_2 {
            return Err(Error::invalid(
                "epsilon",
                format!("|epsilon| must be < pi/2, got {epsilon}"),
            ));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Two-component polarization state in the {|H>, |V>} basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub h: Complex64,
    pub v: Complex64,
}

impl PolarizationState {
    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &PolarizationState) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// `<self|A|other>` with A = diag(+1, -1) in the {|H>, |V>} basis.
    pub fn matrix_element_a(&self, other: &PolarizationState) -> Complex64 {
        self.h.conj() * other.h - self.v.conj() * other.v
    }
}

/// Delay between the polarization components, stored in ps.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CouplingDelay(f64);

impl CouplingDelay {
    pub fn new(tau_ps: f64) -> Result<Self> {
        if !tau_ps.is_finite() {
            return Err(Error::invalid("tau", "must be finite"));
        }
        Ok(Self(tau_ps))
    }

    pub fn from_attoseconds(tau_as: f64) -> Result<Self> {
        Self::new(tau_as * PS_PER_AS)
    }

    pub fn ps(self) -> f64 {
        self.0
    }

    pub fn attoseconds(self) -> f64 {
        self.0 / PS_PER_AS
    }
}

pub fn preselected_state() -> PolarizationState {
    PolarizationState {
        h: Complex64::new(FRAC_1_SQRT_2, 0.0),
        v: Complex64::new(0.0, FRAC_1_SQRT_2),
    }
}

pub fn postselected_state(sel: SelectionSpec) -> PolarizationState {
    let phase = Complex64::from_polar(FRAC_1_SQRT_2, sel.epsilon);
    PolarizationState {
        h: Complex64::i() * phase,
        v: phase.conj(),
    }
}

/// Normalized Gaussian spectral amplitude f(omega); real and positive.
pub fn gaussian_amplitude(meter: MeterSpec, omega: f64) -> f64 {
    let x = (omega - meter.omega0) / meter.delta;
    (PI * meter.delta * meter.delta).powf(-0.25) * (-0.5 * x * x).exp()
}

/// Meter amplitude at `omega` after the delay coupling and projection onto
/// the postselected polarization (unnormalized; its squared modulus integrates
/// to the postselection probability).
///
/// The coupling applies `exp(+i omega tau)` to |H> and `exp(-i omega tau)` to
/// |V>. The result equals `f(omega) sin(omega tau - epsilon)` up to a global
/// phase.
pub fn postselected_amplitude(meter: MeterSpec, sel: SelectionSpec, tau: CouplingDelay, omega: f64) -> Complex64 {
    let pre = preselected_state();
    let post = postselected_state(sel);
    let kick = Complex64::from_polar(1.0, omega * tau.ps());
    let coupled = PolarizationState {
        h: pre.h * kick,
        v: pre.v * kick.conj(),
    };
    post.inner(&coupled) * gaussian_amplitude(meter, omega)
}

/// Postselected spectral density `sin^2(omega tau - epsilon) |f(omega)|^2`.
pub fn spectral_density(meter: MeterSpec, sel: SelectionSpec, tau: CouplingDelay, omega: f64) -> f64 {
    let f = gaussian_amplitude(meter, omega);
    let s = (omega * tau.ps() - sel.epsilon).sin();
    s * s * f * f
}

/// Exact postselection probability for the Gaussian meter.
pub fn postselection_probability(meter: MeterSpec, sel: SelectionSpec, tau: CouplingDelay) -> f64 {
    let t = tau.ps();
    let damping = (-(meter.delta * t).powi(2)).exp();
    let phase = 2.0 * (meter.omega0 * t - sel.epsilon);
    // 0.5 * (1 - cos 2x) = sin^2 x keeps precision when damping ~ 1.
    let p = -0.5 * (-(meter.delta * t).powi(2)).exp_m1() + damping * (0.5 * phase).sin().powi(2);
    p.clamp(0.0, 1.0)
}

/// Weak value `<phi|A|psi> / <phi|psi>` of the polarization observable.
pub fn weak_value(sel: SelectionSpec) -> Result<Complex64> {
    if sel.epsilon == 0.0 {
        return Err(Error::SingularPostselection);
    }
    let pre = preselected_state();
    let post = postselected_state(sel);
    Ok(post.matrix_element_a(&pre) / post.inner(&pre))
}
