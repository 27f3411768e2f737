use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("expected a unit vector, got norm {norm}")]
    NotUnit { norm: f64 },

    #[error("data is not stationary: {quantity} std {std:.4} exceeds {limit}")]
    NotStationary {
        quantity: String,
        std: f64,
        limit: f64,
    },

    #[error("implausible stationary accelerometer data: sample {index} has norm {norm:.4} m/s^2")]
    ImplausibleStationary { index: usize, norm: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
