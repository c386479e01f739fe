use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve parameters: {0}")]
    InvalidCurve(String),

    #[error("invalid swarm parameters: {0}")]
    InvalidSwarm(String),

    #[error("invalid planning input: {0}")]
    InvalidPlanning(String),

    #[error("invalid tracker configuration: {0}")]
    InvalidTracker(String),

    #[error("network topology violation: {0}")]
    Topology(String),

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("guarantee check refused the scenario: {}", .0.join("; "))]
    GuaranteeRefused(Vec<String>),

    #[error("simulation aborted at t={t}: {reason}")]
    SimulationAborted { t: f64, reason: String },

    #[error("no admissible 3D parameters: {0}")]
    NoAdmissibleParams(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
