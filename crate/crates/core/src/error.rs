use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameter {name} = {value}: must be finite and > 0")]
    InvalidParams { name: &'static str, value: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("season too short: junction time t_hat = {t_hat} is not positive")]
    SeasonTooShort { t_hat: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("invalid tributary anchor: {0}")]
    InvalidAnchor(String),

    #[error("insufficient interior: {0}")]
    InsufficientInterior(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
