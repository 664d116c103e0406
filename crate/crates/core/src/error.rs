use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the numeric core and the sweep front end.
///
/// Each message is prefixed with the module that produced it so that errors
/// surfacing from a full pipeline run can be attributed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("params: invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("steadystate: mirror unbound (eta/omega_m = {eta} >= 1)")]
    MirrorUnbound { eta: f64 },

    #[error("steadystate: negative drive amplitude {0}")]
    NegativeDrive(f64),

    #[error("dynamics: threshold formula inapplicable: {0}")]
    ThresholdInapplicable(String),

    #[error("lyapunov: no stationary state (max Re eig = {max_re:e})")]
    NoStationaryState { max_re: f64 },

    #[error("lyapunov: invalid diffusion matrix: {0}")]
    InvalidDiffusion(String),

    #[error("lyapunov: singular linear system")]
    Singular,

    #[error("lyapunov: moment integration did not converge (|dV/dt| = {residual:e} at t = {t_max})")]
    NotConverged { residual: f64, t_max: f64 },

    #[error("measures: unphysical covariance matrix: {0}")]
    Unphysical(String),

    #[error("measures: f(x) argument {0} below 1/2")]
    EntropyDomain(f64),

    #[error("sweep: no sign change in bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics themselves rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular
                | Error::NotConverged { .. }
                | Error::Unphysical(_)
                | Error::EntropyDomain(_)
        )
    }
}
