use thiserror::Error;

/// Errors raised by the model, simulation, controllers and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("negative load mass {0} kg")]
    NegativeMass(f64),

    #[error("generalized mass matrix is singular (det = {0:e})")]
    SingularInertia(f64),

    #[error("friction identification is rank deficient ({0})")]
    RankDeficient(String),

    #[error("controller variant `{0}` needs the strap force sensor, which is marked unavailable")]
    SensorUnavailable(&'static str),

    #[error("empty sample")]
    EmptySample,

    #[error("simulation fault at t = {t:.4} s: {reason}")]
    Fault { t: f64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
