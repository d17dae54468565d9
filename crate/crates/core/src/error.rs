//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Zero channel gain reported together with a nonzero rate.
    #[error("channel outage for user {user}: zero gain with nonzero rate")]
    Outage { user: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty rollout")]
    EmptyRollout,

    /// Battery drain request exceeding the stored level. Dispatch clipping
    /// prevents this in normal operation; hitting it means a caller bypassed it.
    #[error("battery draw {draw} J exceeds stored level {level} J")]
    BatteryDraw { draw: f64, level: f64 },

    #[error("numerical divergence: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
