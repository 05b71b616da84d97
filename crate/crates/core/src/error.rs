use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("postselection is singular at epsilon = 0 (weak value undefined)")]
    SingularPostselection,

    #[error("mean spectral shift undefined: postselection probability is {probability:e}")]
    UndefinedShift { probability: f64 },

    #[error("centroid undefined: sampled spectrum has zero mass")]
    UndefinedCentroid,

    #[error("no extinction point for tau = 0")]
    NoExtinction,

    #[error("aliasing guard: {edge_fraction:e} of the spectral mass lies within 3 points of the band edge")]
    Aliasing { edge_fraction: f64 },

    #[error("finite difference did not converge (last relative change {last_change:e})")]
    NoConvergence { last_change: f64 },

    #[error("OSA span [{lo:.3}, {hi:.3}] rad/ps is not covered by samples [{grid_lo:.3}, {grid_hi:.3}]")]
    SpanMismatch {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("binned spectrum has zero mass")]
    ZeroMass,

    #[error("no estimate: {0}")]
    NoEstimate(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
