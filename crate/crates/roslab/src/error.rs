use thiserror::Error;

/// Failure kinds shared by every module. The harness maps them to exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("log integrity error: {0}")]
    Integrity(String),
    #[error("singularity: adjusted weighted mass {value:e} below floor {floor:e} at t={t}")]
    Singularity { t: f64, value: f64, floor: f64 },
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("convergence error: {0}")]
    Convergence(String),
    #[error("matrix not PSD: smallest eigenvalue {0:e}")]
    NotPsd(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
