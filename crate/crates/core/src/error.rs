use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid configuration: {key}: {reason}")]
    Config { key: &'static str, reason: String },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("empty analysis window [{t0}, {t1}]")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("vehicle index {0} out of range")]
    NoSuchVehicle(usize),
}

impl SimError {
    pub(crate) fn config(key: &'static str, reason: impl Into<String>) -> Self {
        SimError::Config {
            key,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
