use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cell edge {cell_m:.4e} m is not below twice the exchange length ({lex_m:.4e} m)")]
    CellTooCoarse { cell_m: f64, lex_m: f64 },

    #[error("time step {dt_s:.3e} s exceeds the RK4 stability bound {bound_s:.3e} s")]
    TimeStepTooLarge { dt_s: f64, bound_s: f64 },

    #[error("non-finite effective field at step {step}")]
    NonFinite { step: u64 },

    #[error("relaxation did not converge after {steps} steps (max torque {torque:.3e})")]
    NotConverged { steps: u64, torque: f64 },

    #[error("not a vortex: {0}")]
    NotAVortex(String),

    #[error("vortex lost at B_dc = {b_dc_t} T: {reason}")]
    VortexLost { b_dc_t: f64, reason: String },

    #[error("insufficient frequency resolution: {0}")]
    InsufficientResolution(String),

    #[error("no peak: {0}")]
    NoPeak(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("no steady state after {duration_s:.3e} s (last envelope change {change:.3e})")]
    NoSteadyState { duration_s: f64, change: f64 },

    #[error("photon-number cutoff {n_max} too small: doublet moved by {shift:.3e} (relative)")]
    CutoffTooSmall { n_max: usize, shift: f64 },

    #[error("OVF: {0}")]
    Ovf(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Validation errors are problems with the inputs, as opposed to
    /// numerical failures during a run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Domain(_) | Error::CellTooCoarse { .. } | Error::TimeStepTooLarge { .. }
        )
    }
}
